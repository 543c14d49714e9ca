"""Offline estimation: the pruned threshold range, its salient part, the
response oracle, the oracle-based optimum estimator and analytic bounds."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_THETA_BOUNDS,
    BaseDistribution,
    CostFunction,
    DomainError,
    RandomSource,
    reach_points,
)
from .response import ResponseModel, respond_array
from .risk import solve_theta_sl

__all__ = [
    "SalientRegion",
    "ResponseOracle",
    "OracleEstimate",
    "construct_theta0",
    "salient_part",
    "label_sample_sizes",
    "estimate_optimum_via_oracle",
    "estimate_sigma",
    "tv_lipschitz_bound",
    "tv_sigma_bound",
    "pr_suboptimality_bound",
    "sigma_mismatch_gap_bound",
]

CHAIN_STEPS = 3


@dataclass(frozen=True)
class SalientRegion:
    theta0: tuple[float, float]
    salient: tuple[float, float]
    zeta: float
    zeta_by_label: tuple[float, float] = (float("nan"), float("nan"))

    def __post_init__(self) -> None:
        (l, u), (sl, su) = self.theta0, self.salient
        if not (sl <= l <= u <= su):
            raise ValueError("salient interval must contain theta0")

    def contains(self, x) -> np.ndarray:
        return (np.asarray(x) >= self.salient[0]) & (np.asarray(x) < self.salient[1])


def _chain(cost: CostFunction, start: float, steps: int, side: int, limit: float) -> float:
    pt = start
    for _ in range(steps):
        l, u = reach_points(cost, pt)
        pt = l if side < 0 else u
        if side * (pt - limit) >= 0:
            return limit
    return pt


def construct_theta0(
    base: BaseDistribution,
    cost: CostFunction,
    theta_bounds: tuple[float, float] = DEFAULT_THETA_BOUNDS,
    steps: int = CHAIN_STEPS,
) -> tuple[float, float]:
    """Range guaranteed to hold the optimum: ``steps`` budget-sized hops each way from theta_SL, clipped."""
    sl = solve_theta_sl(base)
    return (_chain(cost, sl, steps, -1, theta_bounds[0]), _chain(cost, sl, steps, +1, theta_bounds[1]))


def salient_part(theta0: tuple[float, float], cost: CostFunction, base: BaseDistribution | None = None) -> SalientRegion:
    """Features whose classification some theta in ``theta0`` can flip: one more hop beyond each end."""
    l, u = float(theta0[0]), float(theta0[1])
    if l > u:
        raise ValueError("theta0 must satisfy l <= u")
    lo = reach_points(cost, l)[0]
    hi = reach_points(cost, u)[1]
    if base is None:
        return SalientRegion((l, u), (lo, hi), float("nan"))
    lo, hi = max(lo, base.x_min), min(hi, base.x_max)
    zy = (base.mass(lo, hi, 0), base.mass(lo, hi, 1))
    return SalientRegion((l, u), (lo, hi), zy[0] + zy[1], zy)


class ResponseOracle:
    """Black box answering "where does a fresh agent at x move when theta is deployed".

    The hidden model is kept private; every answered query increments the
    call counter under a lock.
    """

    __slots__ = ("__model", "__gen", "__count", "__lock")

    def __init__(self, model: ResponseModel, rng: RandomSource):
        self.__model = model
        self.__gen = rng.generator()
        self.__count = 0
        self.__lock = threading.Lock()

    def __repr__(self) -> str:
        return f"ResponseOracle(calls={self.call_count})"

    @property
    def call_count(self) -> int:
        return self.__count

    def query_batch(self, x, theta: float) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        m = self.__model
        with self.__lock:
            z = self.__gen.standard_normal(xs.size)
            u = self.__gen.random(xs.size)
            self.__count += xs.size
        eta = m.noise_sigma * z
        strategic = u >= m.nonstrategic_fraction
        return respond_array(m, xs, eta, strategic, theta)

    def query(self, x: float, theta: float) -> float:
        return float(self.query_batch([x], theta)[0])


@dataclass(frozen=True)
class OracleEstimate:
    theta_hat: float
    calls: int
    pr_hat: float
    region: SalientRegion
    net: np.ndarray
    n_by_label: tuple[int, int]

    def report(self) -> dict:
        return {
            "epsilon": float(self.net[1] - self.net[0]) if self.net.size > 1 else 0.0,
            "zeta": self.region.zeta,
            "calls": self.calls,
            "theta_hat": self.theta_hat,
            "pr_hat": self.pr_hat,
        }


def label_sample_sizes(region: SalientRegion, epsilon: float, constant: float = 1.0) -> tuple[int, int]:
    """Per-label draws so that a DKW band of width eps / zeta_y holds with probability ~1 - eps."""
    log_term = math.log(1.0 / epsilon)
    return tuple(max(1, math.ceil(constant * z * z * log_term / (2.0 * epsilon * epsilon))) for z in region.zeta_by_label)


def estimate_optimum_via_oracle(
    oracle: ResponseOracle,
    base: BaseDistribution,
    cost: CostFunction,
    epsilon: float,
    theta0: tuple[float, float],
    rng: RandomSource,
    n_by_label: tuple[int, int] | None = None,
    constant: float = 1.0,
) -> OracleEstimate:
    """Two-stage estimate of the performative optimum from oracle queries.

    For each point of an epsilon-net over ``theta0`` the estimator draws
    agents from the base restricted to the salient part, separately per
    label, and asks the oracle for their responses.  The risk estimate
    weights each label's empirical error by its salient mass and adds the
    exact base error outside the salient part, where no response can
    change the classification.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    region = salient_part(theta0, cost, base)
    if n_by_label is None:
        n_by_label = label_sample_sizes(region, epsilon, constant)
    lo_s, hi_s = region.salient
    l, u = region.theta0
    net = l + epsilon * np.arange(int(math.floor((u - l) / epsilon + 1e-9)) + 1)
    if net[-1] < u - 1e-12:
        net = np.append(net, u)
    net = np.round(net, 10)

    calls_before = oracle.call_count
    risks = np.empty(net.size)
    for k, theta in enumerate(net):
        stream = rng.child(k)
        est = 0.0
        for y in (0, 1):
            zy = region.zeta_by_label[y]
            if zy <= 0:
                continue
            xs = base.sample_given_label(n_by_label[y], y, stream.child(y), lo_s, hi_s)
            xp = oracle.query_batch(xs, float(theta))
            wrong = np.mean(xp >= theta) if y == 0 else np.mean(xp < theta)
            est += zy * float(wrong)
        # outside the salient part nobody crosses theta: negatives above it and
        # positives below it are misclassified
        est += base.mass(hi_s, base.x_max, 0) + base.mass(base.x_min, lo_s, 1)
        risks[k] = est
    k = int(np.argmin(risks))
    return OracleEstimate(float(net[k]), oracle.call_count - calls_before, float(risks[k]), region, net, tuple(n_by_label))


def estimate_sigma(survey, true_theta: float) -> float:
    """RMS deviation of surveyed perceived thresholds from the deployed one."""
    s = np.asarray(survey, dtype=float)
    if s.size == 0:
        raise DomainError("survey is empty")
    return float(np.sqrt(np.mean((s - true_theta) ** 2)))


def tv_lipschitz_bound(sigma: float, theta: float, theta_prime: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return abs(theta - theta_prime) / (2.0 * sigma)


def tv_sigma_bound(sigma: float, sigma_hat: float, m: int = 1) -> float:
    if not (sigma > 0 and sigma_hat > 0):
        raise ValueError("scales must be positive")
    return 0.5 * math.sqrt(abs(sigma**2 - sigma_hat**2) * m / min(sigma**2, sigma_hat**2))


def pr_suboptimality_bound(tv_sup: float) -> float:
    return 2.0 * tv_sup


def sigma_mismatch_gap_bound(sigma: float, sigma_hat: float, m: int = 1) -> float:
    """Risk gap bound from optimising under a misspecified noise scale."""
    return pr_suboptimality_bound(tv_sigma_bound(sigma, sigma_hat, m))
