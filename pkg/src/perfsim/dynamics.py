"""Retraining dynamics and the search for stable and optimal thresholds."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .aggregate import respond_batch, sample_map
from .core import DEFAULT_THETA_BOUNDS, BaseDistribution, RandomSource, UnsupportedConfiguration
from .response import ResponseModel, draw_agents
from .risk import RiskEstimate, dpr_counts

__all__ = [
    "Verdict",
    "Trajectory",
    "classify_trajectory",
    "rrm_step",
    "rrm_trajectory",
    "rgd_trajectory",
    "StabilityPoint",
    "local_stability_scan",
    "performative_optimum",
    "risk_curve",
]


@dataclass(frozen=True)
class Verdict:
    kind: str  # converged | oscillating | budget_exhausted
    limit: float | None = None
    round: int | None = None
    low: float | None = None
    high: float | None = None
    period: float | None = None

    def tag(self) -> str:
        if self.kind == "converged":
            return f"converged(limit={self.limit:.6g},round={self.round})"
        if self.kind == "oscillating":
            return f"oscillating(low={self.low:.6g},high={self.high:.6g},period={self.period:.6g})"
        return "budget_exhausted"


def _tail(values: np.ndarray, fraction: float) -> np.ndarray:
    start = int(len(values) * (1.0 - fraction))
    return values[min(start, len(values) - 2) :]


def classify_trajectory(
    thetas,
    grid_step: float,
    tail_fraction: float = 0.75,
    band: float = 0.05,
    min_periods: int = 5,
) -> Verdict:
    """Label a trajectory from its last ``tail_fraction`` of rounds.

    Converged: the tail stays within a band of width ``band`` and contains
    three consecutive steps no larger than ``grid_step``.  The limit is the
    tail median and the round is the start of the first such run.

    Oscillating: the tail makes at least ``min_periods`` sharp drops (a
    fall of more than half its range in one step).  Peaks are the values
    just before each drop and troughs the values just after.  Peaks must
    agree to within two grid steps (interquartile range); troughs carry
    the argmin noise of the few agents that inform them and only need an
    interquartile range below a quarter of the amplitude.  Endpoints are
    the medians.
    """
    th = np.asarray(thetas, dtype=float)
    if th.size < 4:
        return Verdict("budget_exhausted")
    tail = _tail(th, tail_fraction)
    offset = th.size - tail.size
    spread = float(np.quantile(tail, 0.98) - np.quantile(tail, 0.02))
    steps = np.abs(np.diff(tail)) <= grid_step + 1e-12
    runs = np.flatnonzero(steps[:-2] & steps[1:-1] & steps[2:]) if steps.size >= 3 else np.array([], dtype=int)
    if spread <= band and runs.size:
        return Verdict("converged", limit=float(np.median(tail)), round=int(offset + runs[0]))

    drops = np.flatnonzero(np.diff(tail) < -0.5 * max(spread, 2.0 * grid_step))
    if drops.size >= min_periods:
        peaks = tail[drops]
        troughs = tail[drops + 1]
        high, low = float(np.median(peaks)), float(np.median(troughs))
        iqr = lambda v: float(np.subtract(*np.quantile(v, [0.75, 0.25])))
        if iqr(peaks) <= 2.0 * grid_step + 1e-12 and iqr(troughs) <= 0.25 * (high - low):
            period = float(np.median(np.diff(drops))) if drops.size > 1 else float("nan")
            return Verdict("oscillating", low=low, high=high, period=period)
    return Verdict("budget_exhausted")


@dataclass(frozen=True)
class Trajectory:
    thetas: np.ndarray
    verdict: Verdict
    grid_step: float
    dpr: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_csv(self, stream: TextIO, provenance: str | None = None) -> None:
        if provenance:
            stream.write(f"# {provenance}\n")
        stream.write("round,theta,dpr_at_theta,verdict\n")
        tag = self.verdict.tag()
        dpr = self.dpr if self.dpr.size == self.thetas.size else np.full(self.thetas.size, np.nan)
        for k, (t, d) in enumerate(zip(self.thetas, dpr)):
            stream.write(f"{k},{t:.12g},{d:.12g},{tag}\n")

    def to_csv_string(self, provenance: str | None = None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, provenance)
        return buf.getvalue()


def _grid_step(grid: np.ndarray) -> float:
    return float(np.min(np.diff(grid))) if grid.size > 1 else 0.0


def _rrm_argmin(counts: np.ndarray, grid: np.ndarray, incumbent: float) -> int:
    best = counts.min()
    ties = np.flatnonzero(counts == best)
    here = np.flatnonzero(np.isclose(grid[ties], incumbent, rtol=0.0, atol=1e-12))
    return int(ties[here[0]]) if here.size else int(ties[0])


def _rrm_round(model, base, theta, grid, n, rng) -> tuple[float, float]:
    sample = sample_map(model, base, theta, n, rng)
    counts = dpr_counts(sample, grid)
    k = _rrm_argmin(counts, grid, theta)
    return float(grid[k]), float(dpr_counts(sample, theta)[0]) / n


def rrm_step(model: ResponseModel, base: BaseDistribution, theta: float, theta_grid, n: int, rng: RandomSource) -> float:
    """One round of repeated risk minimisation.

    The population responds to ``theta`` and the new threshold is the grid
    argmin of the empirical risk on that fixed sample.  Exact ties keep the
    incumbent when it is among the minimisers and otherwise take the
    smallest grid point.
    """
    grid = np.asarray(theta_grid, dtype=float)
    return _rrm_round(model, base, theta, grid, n, rng)[0]


def rrm_trajectory(
    model: ResponseModel,
    base: BaseDistribution,
    theta0: float,
    rounds: int,
    theta_grid,
    n: int,
    rng: RandomSource,
    band: float = 0.05,
) -> Trajectory:
    """Iterate :func:`rrm_step` with a fresh population each round."""
    if rounds < 10:
        raise ValueError("rounds must be >= 10")
    grid = np.asarray(theta_grid, dtype=float)
    thetas = [float(theta0)]
    dpr = []
    for r in range(rounds):
        nxt, risk_here = _rrm_round(model, base, thetas[-1], grid, n, rng.child(r))
        dpr.append(risk_here)
        thetas.append(nxt)
    last = sample_map(model, base, thetas[-1], n, rng.child(rounds))
    dpr.append(float(dpr_counts(last, thetas[-1])[0]) / n)
    step = _grid_step(grid)
    arr = np.array(thetas)
    return Trajectory(arr, classify_trajectory(arr, step, band=band), step, np.array(dpr))


def rgd_trajectory(
    model: ResponseModel,
    base: BaseDistribution,
    theta0: float,
    step_size: float,
    rounds: int,
    fd_delta: float,
    n: int,
    rng: RandomSource,
    bounds: tuple[float, float] = DEFAULT_THETA_BOUNDS,
    grid_step: float = 0.005,
) -> Trajectory:
    """Repeated gradient descent on the decoupled risk.

    Each round draws a population at the current threshold and steps
    against the central finite difference of DPR(theta, .) at theta.
    Models whose aggregate has an atom at the threshold are refused.
    """
    if not model.is_smooth:
        raise UnsupportedConfiguration(f"gradient steps are undefined for {model.label()}: the risk has a jump at the threshold")
    if fd_delta <= 0 or step_size <= 0:
        raise ValueError("step_size and fd_delta must be positive")
    thetas = [float(theta0)]
    dpr = []
    for r in range(rounds):
        theta = thetas[-1]
        sample = sample_map(model, base, theta, n, rng.child(r))
        lo, mid, hi = dpr_counts(sample, [theta - fd_delta, theta, theta + fd_delta]) / n
        dpr.append(float(mid))
        grad = (hi - lo) / (2.0 * fd_delta)
        thetas.append(float(np.clip(theta - step_size * grad, bounds[0], bounds[1])))
    last = sample_map(model, base, thetas[-1], n, rng.child(rounds))
    dpr.append(float(dpr_counts(last, thetas[-1])[0]) / n)
    arr = np.array(thetas)
    return Trajectory(arr, classify_trajectory(arr, grid_step), grid_step, np.array(dpr))


@dataclass(frozen=True)
class StabilityPoint:
    theta: float
    stable: bool
    margin: float


def local_stability_scan(
    model: ResponseModel,
    base: BaseDistribution,
    theta_grid,
    neighborhood: float,
    n: int,
    rng: RandomSource,
    thetas=None,
) -> list[StabilityPoint]:
    """Check each candidate theta against its neighbours on its own distribution.

    All candidates share one population (common random numbers).  A point
    is stable when DPR(theta, theta) exceeds the smallest DPR(theta, theta')
    over the neighbourhood by at most three standard errors.  The standard
    error is that of the paired difference: only the m responses lying
    between theta and the best theta' can change classification, so it is
    sqrt(m) / n.  The margin is the minimum minus DPR(theta, theta).
    """
    grid = np.asarray(theta_grid, dtype=float)
    step = _grid_step(grid)
    if neighborhood < 2 * step - 1e-12:
        raise ValueError("neighborhood must span at least two grid steps")
    cands = grid if thetas is None else np.asarray(thetas, dtype=float)
    agents = draw_agents(model, base, n, rng)
    out = []
    for theta in cands:
        sample = respond_batch(model, agents, float(theta))
        near = grid[np.abs(grid - theta) <= neighborhood + 1e-12]
        counts = dpr_counts(sample, np.append(near, theta))
        k = int(np.argmin(counts[:-1]))
        lo, hi = sorted((float(theta), float(near[k])))
        between = np.count_nonzero((sample.x_prime >= lo) & (sample.x_prime < hi))
        gap = int(counts[-1] - counts[k])
        out.append(StabilityPoint(float(theta), bool(gap <= 3.0 * np.sqrt(between)), float(-gap / n)))
    return out


def risk_curve(model: ResponseModel, base: BaseDistribution, theta_grid, n: int, rng: RandomSource) -> np.ndarray:
    """Misclassification counts of each grid threshold on its own response (shared population)."""
    grid = np.asarray(theta_grid, dtype=float)
    agents = draw_agents(model, base, n, rng)
    return np.array([dpr_counts(respond_batch(model, agents, float(t)), t)[0] for t in grid])


def performative_optimum(
    model: ResponseModel,
    base: BaseDistribution,
    theta_grid,
    n: int,
    rng: RandomSource,
) -> tuple[float, RiskEstimate]:
    """Grid argmin of the performative risk under common random numbers (ties to the smallest)."""
    grid = np.asarray(theta_grid, dtype=float)
    counts = risk_curve(model, base, grid, n, rng)
    k = int(np.argmin(counts))
    return float(grid[k]), RiskEstimate.monte_carlo(int(counts[k]), n)
