"""The induced distribution D(theta): samplers, closed-form densities, distances."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy import integrate, special

from .core import (
    BaseDistribution,
    CostFunction,
    DomainError,
    RandomSource,
    reach_arrays,
    reach_points,
)
from .response import AgentBatch, ResponseModel, draw_agents, respond_array

__all__ = [
    "AggregateSample",
    "DensityProfile",
    "SmoothnessReport",
    "sample_map",
    "respond_batch",
    "sm_point_mass",
    "nr_density",
    "density_profile",
    "empirical_distance",
    "ks_against_cdf",
    "smoothness_diagnostic",
    "wasserstein_counterexample",
]

TV_BINS = 200


@dataclass(frozen=True)
class AggregateSample:
    """Post-response pairs (x', y) drawn from D(theta) for one model."""

    theta: float
    x_prime: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.x_prime.shape != self.y.shape:
            raise ValueError("x_prime and y must be aligned")

    @property
    def n(self) -> int:
        return int(self.x_prime.size)

    def values(self, label: int | None = None) -> np.ndarray:
        return self.x_prime if label is None else self.x_prime[self.y == label]

    def atom_weight(self, location: float | None = None) -> float:
        loc = self.theta if location is None else location
        return float(np.count_nonzero(self.x_prime == loc)) / self.n


def respond_batch(model: ResponseModel, agents: AgentBatch, theta: float, provenance: dict | None = None) -> AggregateSample:
    """Push an already drawn population through the model (common random numbers)."""
    xp = respond_array(model, agents.x, agents.eta, agents.strategic, theta)
    return AggregateSample(float(theta), xp, agents.y, provenance or {})


def sample_map(model: ResponseModel, base: BaseDistribution, theta: float, n: int, rng: RandomSource) -> AggregateSample:
    """Draw ``n`` agents and return their responses to ``theta``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    agents = draw_agents(model, base, n, rng)
    prov = {"model": model.label(), "seed": rng.seed, "stream": rng.stream_id, "n": n}
    return respond_batch(model, agents, theta, prov)


def gaming_interval(base: BaseDistribution, cost: CostFunction, theta: float) -> tuple[float, float]:
    """``[lo, theta)``: base features that the standard model moves to ``theta``."""
    l, _ = reach_points(cost, theta)
    return max(l, base.x_min), float(theta)


def sm_point_mass(base: BaseDistribution, cost: CostFunction, theta: float) -> float:
    """Weight of the atom at ``theta`` under the standard response."""
    lo, hi = gaming_interval(base, cost, theta)
    return base.mass(lo, hi)


# ---------------------------------------------------------------------------
# closed-form density of the noisy response


def _outside(a, b, sigma: float):
    """P[eta not in (a, b)] for eta ~ N(0, sigma^2)."""
    return 1.0 - (special.ndtr(np.asarray(b) / sigma) - special.ndtr(np.asarray(a) / sigma))


def nr_density(base: BaseDistribution, cost: CostFunction, sigma: float, theta: float, x_prime, y: int):
    """Density of (x', y) under the noisy response with scale ``sigma``.

    Stayers at x' contribute the base density times the chance that the
    perceived threshold falls outside their reach; movers arrive at x'
    when the perceived threshold equals x' and they start within reach.
    Clamping of the perceived threshold is ignored (it affects mass more
    than six noise scales outside the support).
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    xp = np.asarray(x_prime, dtype=float)
    stay = base.density(xp, y)
    l, u = reach_arrays(cost, xp)
    stay = stay * _outside(xp - theta, u - theta, sigma)
    noise = np.exp(-0.5 * ((xp - theta) / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    movers = noise * base.mass(np.maximum(l, base.x_min), np.minimum(xp, base.x_max), y)
    out = stay + movers
    return out if np.ndim(x_prime) else float(out)


@dataclass(frozen=True)
class DensityProfile:
    """Per-label densities on a grid plus explicit atoms ``(location, weight)``."""

    grid: np.ndarray
    density_y0: np.ndarray
    density_y1: np.ndarray
    point_masses: tuple[tuple[float, float], ...] = ()
    method: str = "closed_form"

    @property
    def marginal(self) -> np.ndarray:
        return self.density_y0 + self.density_y1

    def total_mass(self) -> float:
        return float(integrate.trapezoid(self.marginal, self.grid)) + sum(w for _, w in self.point_masses)

    def marginal_cdf(self, x) -> np.ndarray:
        """CDF of the x' marginal (cumulative trapezoid, atoms included)."""
        dens = self.marginal
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(self.grid))])
        out = np.interp(np.asarray(x, dtype=float), self.grid, cum, left=0.0, right=cum[-1])
        for loc, w in self.point_masses:
            out = out + np.where(np.asarray(x) >= loc, w, 0.0)
        return out

    def to_csv(self, stream: TextIO, provenance: str | None = None) -> None:
        if provenance:
            stream.write(f"# {provenance}\n")
        stream.write("grid_x,density_y0,density_y1\n")
        for g, d0, d1 in zip(self.grid, self.density_y0, self.density_y1):
            stream.write(f"{g:.12g},{d0:.12g},{d1:.12g}\n")
        for loc, w in self.point_masses:
            stream.write(f"# atom,{loc:.12g},{w:.12g}\n")

    def to_csv_string(self, provenance: str | None = None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, provenance)
        return buf.getvalue()


def _bin_edges(grid: np.ndarray) -> np.ndarray:
    mids = 0.5 * (grid[1:] + grid[:-1])
    return np.concatenate([[grid[0] - (mids[0] - grid[0])], mids, [grid[-1] + (grid[-1] - mids[-1])]])


def density_profile(
    model: ResponseModel,
    base: BaseDistribution,
    theta: float,
    grid,
    n: int,
    rng: RandomSource,
) -> DensityProfile:
    """Density of D(theta) on ``grid``.

    Pure noisy models use the closed form.  Other models are sampled.  For
    models with a standard component the atom at ``theta`` is counted by
    exact equality (that response lands bit-exactly on ``theta``), and the
    remaining points are histogrammed in bins centred on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    if model.kind == "noisy":
        d0 = nr_density(base, model.cost, model.sigma, theta, grid, 0)
        d1 = nr_density(base, model.cost, model.sigma, theta, grid, 1)
        return DensityProfile(grid, d0, d1, (), "closed_form")

    sample = sample_map(model, base, theta, n, rng)
    xp, y = sample.x_prime, sample.y
    atoms: list[tuple[float, float]] = []
    is_atom = np.zeros(xp.size, dtype=bool)
    if model.core.kind == "standard":
        hit = xp == float(theta)
        w = np.count_nonzero(hit) / xp.size
        if w > 0:
            atoms.append((float(theta), float(w)))
            is_atom = hit
    edges = _bin_edges(grid)
    widths = np.diff(edges)
    dens = []
    for label in (0, 1):
        keep = (~is_atom) & (y == label)
        counts, _ = np.histogram(xp[keep], bins=edges)
        dens.append(counts / (xp.size * widths))
    return DensityProfile(grid, dens[0], dens[1], tuple(atoms), "histogram")


# ---------------------------------------------------------------------------
# distances


def _ecdf_gap(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.sort(a)
    b = np.sort(b)
    pts = np.union1d(a, b)
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return pts, fa - fb


def _ks(a: np.ndarray, b: np.ndarray) -> float:
    _, gap = _ecdf_gap(a, b)
    return float(np.max(np.abs(gap)))


def _w1(a: np.ndarray, b: np.ndarray) -> float:
    pts, gap = _ecdf_gap(a, b)
    return float(np.sum(np.abs(gap[:-1]) * np.diff(pts)))


def _tv_binned(a: AggregateSample, b: AggregateSample, bins: int, label: int | None) -> float:
    xa, xb = a.values(label), b.values(label)
    lo = min(xa.min(), xb.min())
    hi = max(xa.max(), xb.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    total = 0.0
    labels = (0, 1) if label is None else (label,)
    for lab in labels:
        ha, _ = np.histogram(a.x_prime[a.y == lab], bins=edges)
        hb, _ = np.histogram(b.x_prime[b.y == lab], bins=edges)
        total += float(np.sum(np.abs(ha / xa.size - hb / xb.size)))
    return 0.5 * total


def empirical_distance(
    a: AggregateSample,
    b: AggregateSample,
    metric: str,
    bins: int = TV_BINS,
    label: int | None = None,
) -> float:
    """Distance between two samples.

    ``KS`` and ``W1`` compare the x' marginal (or the label-``label``
    conditional); ``TV`` bins the joint (x', y) law into ``bins`` equal
    slices per label.
    """
    xa, xb = a.values(label), b.values(label)
    if xa.size == 0 or xb.size == 0:
        raise DomainError("empty sample")
    metric = metric.upper()
    if metric == "KS":
        return _ks(xa, xb)
    if metric == "W1":
        return _w1(xa, xb)
    if metric in ("TV", "TV_BINNED"):
        if bins < 10:
            raise ValueError("TV needs at least 10 bins")
        return _tv_binned(a, b, bins, label)
    raise ValueError(f"unknown metric {metric!r}")


def ks_against_cdf(values: np.ndarray, cdf) -> float:
    """One-sample KS statistic of ``values`` against a callable CDF."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise DomainError("empty sample")
    f = np.asarray(cdf(v), dtype=float)
    n = v.size
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


# ---------------------------------------------------------------------------
# smoothness of the decoupled risk


@dataclass(frozen=True)
class SmoothnessReport:
    theta: float
    theta_grid: np.ndarray
    derivative: np.ndarray
    noise_floor: np.ndarray
    flags: tuple[float, ...]

    @property
    def smooth(self) -> bool:
        return not self.flags

    def flagged_near(self, location: float, tol: float) -> bool:
        return any(abs(f - location) <= tol for f in self.flags)


def _signed_window_counts(xp: np.ndarray, y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per window [lo, hi): (#label1 - #label0, #total)."""
    out = []
    for lab in (0, 1):
        s = np.sort(xp[y == lab])
        out.append(np.searchsorted(s, hi, side="left") - np.searchsorted(s, lo, side="left"))
    n0, n1 = out
    return n1 - n0, n1 + n0


def _rolling_median(v: np.ndarray, half: int) -> np.ndarray:
    out = np.empty_like(v, dtype=float)
    for k in range(v.size):
        lo, hi = max(0, k - half), min(v.size, k + half + 1)
        neigh = np.concatenate([v[lo:k], v[k + 1 : hi]])
        out[k] = np.median(neigh) if neigh.size else v[k]
    return out


def smoothness_diagnostic(
    model: ResponseModel,
    base: BaseDistribution,
    theta: float,
    theta_grid,
    delta: float,
    n: int,
    rng: RandomSource,
    threshold: float = 5.0,
    window: int = 5,
) -> SmoothnessReport:
    """Finite-difference d/dtheta' of DPR(theta, .) and a jump detector.

    On one fixed sample, d(theta') = (N1 - N0) / (2 delta n) where N_y counts
    label-y responses in [theta' - delta, theta' + delta).  Consecutive
    estimates differ only through the two slivers entering and leaving the
    window, so their noise is set by the sliver counts.  A step is flagged
    when its deviation from the local median step exceeds ``threshold``
    times that noise; the reported location is the centre of the sliver
    holding the larger signed imbalance.
    """
    grid = np.asarray(theta_grid, dtype=float)
    sample = sample_map(model, base, theta, n, rng)
    xp, y = sample.x_prime, sample.y
    scale = 2.0 * delta * n
    signed, _ = _signed_window_counts(xp, y, grid - delta, grid + delta)
    deriv = signed / scale

    top_s, top_c = _signed_window_counts(xp, y, grid[:-1] + delta, grid[1:] + delta)
    bot_s, bot_c = _signed_window_counts(xp, y, grid[:-1] - delta, grid[1:] - delta)
    step = np.diff(deriv)
    trend = _rolling_median(step, window)
    floor = np.sqrt(_rolling_median((top_c + bot_c).astype(float), window) + 1.0) / scale
    dev = np.abs(step - trend)
    flags = []
    for k in np.flatnonzero(dev > threshold * floor):
        if abs(top_s[k]) >= abs(bot_s[k]):
            loc = 0.5 * (grid[k] + grid[k + 1]) + delta
        else:
            loc = 0.5 * (grid[k] + grid[k + 1]) - delta
        flags.append(round(float(loc), 10))
    return SmoothnessReport(float(theta), grid, deriv, floor, tuple(sorted(set(flags))))


# ---------------------------------------------------------------------------
# Wasserstein counterexample


def wasserstein_counterexample(epsilons, n: int = 1_000_000, theta: float = 1.0) -> list[tuple[float, float]]:
    """W1(D(theta), D(theta + eps)) / eps for the squared-difference cost.

    The population is uniform on [0, 1] (a stratified quantile grid, so the
    result is deterministic) and responds with the standard model.
    """
    model = ResponseModel.standard(CostFunction.squared_difference(1.0))
    x = (np.arange(n) + 0.5) / n
    zeros = np.zeros(n)
    keep = np.ones(n, dtype=bool)
    y = np.zeros(n, dtype=np.int8)
    ref = AggregateSample(theta, respond_array(model, x, zeros, keep, theta), y)
    out = []
    for eps in epsilons:
        eps = float(eps)
        if not eps > 0:
            raise ValueError("epsilon must be positive")
        moved = AggregateSample(theta + eps, respond_array(model, x, zeros, keep, theta + eps), y)
        out.append((eps, empirical_distance(ref, moved, "W1") / eps))
    return out
