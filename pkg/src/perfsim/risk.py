"""Performative and decoupled risk, the closed-form noisy risk, and the
oscillation quantities Gamma, Z and tau."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .aggregate import AggregateSample, gaming_interval, sample_map
from .core import (
    DEFAULT_THETA_BOUNDS,
    BaseDistribution,
    CostFunction,
    DomainError,
    RandomSource,
    UnsupportedConfiguration,
)
from .numerics import QUAD_POINTS, bisect, trapezoid
from .response import ResponseModel

__all__ = [
    "RiskEstimate",
    "misclassified_count",
    "dpr_counts",
    "decoupled_pr",
    "performative_risk",
    "exact_pr",
    "sm_pr_exact",
    "nr_pr_closed_form",
    "gamma_ratio",
    "z_function",
    "solve_theta_sl",
    "solve_theta_ps_sm",
    "solve_tau",
    "social_burden",
]

SL_TOL = 1e-12


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_error: float
    n: int
    method: str

    @classmethod
    def monte_carlo(cls, errors: int, n: int) -> "RiskEstimate":
        v = errors / n
        return cls(v, math.sqrt(v * (1.0 - v) / n), n, "monte_carlo")

    @classmethod
    def closed_form(cls, value: float) -> "RiskEstimate":
        return cls(float(value), 0.0, 0, "closed_form")


def _count_at_or_above(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """#{v >= t_j} for every t_j; one pass over ``values`` when ``t`` is sorted."""
    if t.size > 1 and np.all(np.diff(t) > 0):
        k = np.searchsorted(t, values, side="right")
        hist = np.bincount(k, minlength=t.size + 1)
        return values.size - np.cumsum(hist)[:-1]
    s = np.sort(values)
    return s.size - np.searchsorted(s, t, side="left")


def dpr_counts(sample: AggregateSample, theta_eval) -> np.ndarray:
    """Misclassification counts of f_{theta'} on a fixed sample, for each theta'.

    Errors are negatives with x' >= theta' plus positives with x' < theta'.
    """
    t = np.atleast_1d(np.asarray(theta_eval, dtype=float))
    neg = sample.x_prime[sample.y == 0]
    pos = sample.x_prime[sample.y == 1]
    return _count_at_or_above(neg, t) + (pos.size - _count_at_or_above(pos, t))


def misclassified_count(sample: AggregateSample, theta_eval: float) -> int:
    return int(dpr_counts(sample, theta_eval)[0])


def decoupled_pr(
    model: ResponseModel,
    base: BaseDistribution,
    theta: float,
    theta_eval: float,
    n: int,
    rng: RandomSource,
) -> RiskEstimate:
    """Risk of f_{theta_eval} on a sample from D(theta)."""
    sample = sample_map(model, base, theta, n, rng)
    return RiskEstimate.monte_carlo(misclassified_count(sample, theta_eval), n)


def performative_risk(model: ResponseModel, base: BaseDistribution, theta: float, n: int, rng: RandomSource) -> RiskEstimate:
    return decoupled_pr(model, base, theta, theta, n, rng)


# ---------------------------------------------------------------------------
# exact risks


def sm_pr_exact(base: BaseDistribution, cost: CostFunction, theta: float) -> float:
    """Risk of the standard model at ``theta``: everyone in [l_theta, inf) is accepted."""
    lo, _ = gaming_interval(base, cost, theta)
    return base.mass(lo, base.x_max, 0) + base.mass(base.x_min, lo, 1)


def _ns_pr_exact(base: BaseDistribution, theta: float) -> float:
    return base.mass(theta, base.x_max, 0) + base.mass(base.x_min, theta, 1)


def _check_unit_cost(cost: CostFunction) -> None:
    if not cost.is_unit_linear:
        raise UnsupportedConfiguration("the closed-form noisy risk needs the unit linear cost (alpha = gamma = 1)")


def nr_pr_closed_form(base: BaseDistribution, sigma: float, theta: float, cost: CostFunction | None = None) -> RiskEstimate:
    """Exact risk of the noisy response under the unit linear cost.

    Agents at or above ``theta`` are always accepted and agents below
    ``theta - 1`` never are.  An agent at ``theta - 1 + s`` with s in [0, 1)
    is accepted exactly when the noise lands in [0, s], so that strip
    contributes ``p0 + (p1 - p0) * P[eta not in [0, s]]``.
    """
    cost = CostFunction.linear() if cost is None else cost
    _check_unit_cost(cost)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    lo = theta - 1.0
    fixed = base.mass(theta, base.x_max, 0) + base.mass(base.x_min, lo, 1) + base.mass(lo, theta, 0)

    def integrand(s: np.ndarray) -> np.ndarray:
        x = lo + s
        reject = 1.0 - (special.ndtr(s / sigma) - 0.5)
        return (base.density(x, 1) - base.density(x, 0)) * reject

    return RiskEstimate.closed_form(fixed + trapezoid(integrand, 0.0, 1.0, QUAD_POINTS))


def exact_pr(model: ResponseModel, base: BaseDistribution, theta: float) -> float:
    """Noise-free performative risk for the models that admit one."""
    p = model.nonstrategic_fraction
    core = model.core
    if core.kind == "standard":
        strat = sm_pr_exact(base, model.cost, theta)
    elif core.kind == "noisy":
        strat = nr_pr_closed_form(base, core.sigma, theta, model.cost).value
    else:
        strat = _ns_pr_exact(base, theta)
    if p == 0.0:
        return strat
    return p * _ns_pr_exact(base, theta) + (1.0 - p) * strat


# ---------------------------------------------------------------------------
# oscillation quantities


def _excess(base: BaseDistribution, lo: float, hi: float) -> float:
    """Integral of p(x, 1) - p(x, 0) over [lo, hi), i.e. E[1{x in [lo, hi)} (2 mu - 1)]."""
    return base.mass(lo, hi, 1) - base.mass(lo, hi, 0)


def gamma_ratio(base: BaseDistribution, cost: CostFunction, theta: float) -> float:
    """Average posterior over the gaming set [l_theta, theta).

    Evaluated through CDF differences, which are exact for the supported
    mixtures.  A gaming set too thin to resolve falls back to the posterior
    at its midpoint.
    """
    lo, hi = gaming_interval(base, cost, theta)
    if not hi > lo:
        raise DomainError(f"gaming set at theta={theta} is empty")
    total = base.mass(lo, hi)
    if hi - lo < 1e-7 or total < 1e-300:
        return float(base.posterior(0.5 * (lo + hi)))
    return base.mass(lo, hi, 1) / total


def z_function(base: BaseDistribution, cost: CostFunction, p: float, theta: float, theta_sl: float | None = None) -> float:
    """p * excess on [theta_SL, theta] plus (1 - p) * excess on the gaming set."""
    if theta_sl is None:
        theta_sl = solve_theta_sl(base)
    lo, hi = gaming_interval(base, cost, theta)
    return p * _excess(base, theta_sl, theta) + (1.0 - p) * _excess(base, lo, hi)


def solve_theta_sl(base: BaseDistribution) -> float:
    """Where the posterior crosses one half (root of the log-odds)."""
    return bisect(lambda t: float(base.log_odds(t)), base.x_min, base.x_max, tol=SL_TOL)


def solve_theta_ps_sm(base: BaseDistribution, cost: CostFunction, theta_max: float = DEFAULT_THETA_BOUNDS[1]) -> float:
    """Threshold whose gaming set has average posterior one half."""
    lo = solve_theta_sl(base) + 1e-6
    return bisect(lambda t: gamma_ratio(base, cost, t) - 0.5, lo, theta_max)


def solve_tau(base: BaseDistribution, cost: CostFunction, p: float, theta_max: float = DEFAULT_THETA_BOUNDS[1]) -> float:
    """Root of Z(p, .) between theta_SL and the standard-model stable point."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    sl = solve_theta_sl(base)
    ps = solve_theta_ps_sm(base, cost, theta_max)
    return bisect(lambda t: z_function(base, cost, p, t, sl), sl, ps)


def social_burden(base: BaseDistribution, cost: CostFunction, theta: float, points: int = QUAD_POINTS) -> float:
    """Expected cost for a positive agent to reach ``theta``, averaged over positives."""
    if theta <= base.x_min:
        return 0.0
    hi = min(theta, base.x_max)
    pos = base.label_mass(1)
    return trapezoid(lambda x: cost(x, theta) * base.density(x, 1), base.x_min, hi, points) / pos
