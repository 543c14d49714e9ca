"""Populations, manipulation costs, threshold classifiers and seeded randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .numerics import BISECT_MAX_ITER, BISECT_TOL, DomainError, bisect

__all__ = [
    "DomainError",
    "InvariantViolation",
    "UnsupportedConfiguration",
    "Component",
    "BaseDistribution",
    "pdf",
    "sample_base",
    "CostFunction",
    "reach_points",
    "reach_points_bisect",
    "reach_arrays",
    "check_cost_validity",
    "ThresholdClassifier",
    "RandomSource",
    "default_theta_grid",
    "DEFAULT_SUPPORT",
    "DEFAULT_THETA_BOUNDS",
]

DEFAULT_SUPPORT = (-5.0, 6.0)
DEFAULT_THETA_BOUNDS = (-0.5, 2.5)
_OUTSIDE_MASS_TOL = 1e-6
_MASK64 = (1 << 64) - 1


class InvariantViolation(RuntimeError):
    """A structural assumption (validity, monotonicity) does not hold."""


class UnsupportedConfiguration(ValueError):
    """The requested combination of model, cost or method is not implemented."""


# ---------------------------------------------------------------------------
# base distribution


@dataclass(frozen=True)
class Component:
    """One labelled mixture component: ``gaussian(a=mean, b=std)`` or ``uniform(a=lo, b=hi)``."""

    label: int
    weight: float
    kind: str
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        if self.kind == "gaussian":
            if not self.b > 0:
                raise ValueError("gaussian std must be positive")
        elif self.kind == "uniform":
            if not self.b > self.a:
                raise ValueError("uniform requires lo < hi")
        else:
            raise ValueError(f"unknown component kind {self.kind!r}")

    @classmethod
    def gaussian(cls, label: int, weight: float, mean: float, std: float) -> "Component":
        return cls(label, float(weight), "gaussian", float(mean), float(std))

    @classmethod
    def uniform(cls, label: int, weight: float, lo: float, hi: float) -> "Component":
        return cls(label, float(weight), "uniform", float(lo), float(hi))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            z = (x - self.a) / self.b
            return np.exp(-0.5 * z * z) / (self.b * math.sqrt(2.0 * math.pi))
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            z = (x - self.a) / self.b
            return -0.5 * z * z - math.log(self.b * math.sqrt(2.0 * math.pi))
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return special.ndtr((x - self.a) / self.b)
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return self.a + self.b * gen.standard_normal(n)
        return gen.uniform(self.a, self.b, n)

    def describe(self) -> dict:
        keys = ("mean", "std") if self.kind == "gaussian" else ("lo", "hi")
        return {"label": self.label, "weight": self.weight, "kind": self.kind, keys[0]: self.a, keys[1]: self.b}


@dataclass(frozen=True)
class BaseDistribution:
    """Joint law of (x, y) as a labelled mixture restricted to the support X.

    Gaussian components are used untruncated; construction checks that each
    one leaves less than 1e-6 of its mass outside X.
    """

    components: tuple[Component, ...]
    support: tuple[float, float] = DEFAULT_SUPPORT

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "support", (float(self.support[0]), float(self.support[1])))
        lo, hi = self.support
        if not lo < hi:
            raise ValueError("support must satisfy x_min < x_max")
        if not self.components:
            raise ValueError("at least one component is required")
        total = math.fsum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights sum to {total!r}, expected 1")
        for c in self.components:
            outside = float(c.cdf(np.float64(lo)) + (1.0 - c.cdf(np.float64(hi))))
            if outside >= _OUTSIDE_MASS_TOL:
                raise ValueError(f"component {c.describe()} has mass {outside:.2e} outside the support")

    # -- constructors -------------------------------------------------------

    @classmethod
    def symmetric_mixture(
        cls,
        mean0: float = 0.0,
        mean1: float = 1.0,
        std: float = 1.0 / 3.0,
        support: tuple[float, float] = DEFAULT_SUPPORT,
    ) -> "BaseDistribution":
        """Equal-weight Gaussians, label 0 at ``mean0`` and label 1 at ``mean1``."""
        return cls(
            (Component.gaussian(0, 0.5, mean0, std), Component.gaussian(1, 0.5, mean1, std)),
            support,
        )

    @classmethod
    def uniform_marginal(cls, lo: float = 0.0, hi: float = 1.0, positive_rate: float = 0.5) -> "BaseDistribution":
        """Uniform feature marginal on ``[lo, hi]`` with labels independent of x."""
        comps = (
            Component.uniform(0, 1.0 - positive_rate, lo, hi),
            Component.uniform(1, positive_rate, lo, hi),
        )
        return cls(tuple(c for c in comps if c.weight > 0), (lo, hi))

    @classmethod
    def from_spec(cls, components: Sequence[dict], support: Sequence[float] = DEFAULT_SUPPORT) -> "BaseDistribution":
        comps = []
        for c in components:
            if c["kind"] == "gaussian":
                comps.append(Component.gaussian(c["label"], c["weight"], c["mean"], c["std"]))
            else:
                comps.append(Component.uniform(c["label"], c["weight"], c["lo"], c["hi"]))
        return cls(tuple(comps), (support[0], support[1]))

    def describe(self) -> dict:
        return {"components": [c.describe() for c in self.components], "support": list(self.support)}

    # -- densities ----------------------------------------------------------

    @property
    def x_min(self) -> float:
        return self.support[0]

    @property
    def x_max(self) -> float:
        return self.support[1]

    def _check_domain(self, x: np.ndarray) -> None:
        if np.any((x < self.x_min) | (x > self.x_max)) or np.any(np.isnan(x)):
            raise DomainError(f"x outside support [{self.x_min}, {self.x_max}]")

    def _label_components(self, y: int | None) -> list[Component]:
        if y is None:
            return list(self.components)
        if y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {y}")
        return [c for c in self.components if c.label == y]

    def density(self, x, y: int | None = None):
        """Joint density without the support check (zero outside X)."""
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        for c in self._label_components(y):
            out = out + c.weight * c.pdf(xa)
        out = np.where((xa < self.x_min) | (xa > self.x_max), 0.0, out)
        return out if np.ndim(x) else float(out)

    def pdf(self, x, y: int | None = None):
        """Joint density of (x, y); ``y=None`` gives the feature marginal."""
        xa = np.asarray(x, dtype=float)
        self._check_domain(xa)
        return self.density(x, y)

    def cdf(self, x, y: int | None = None):
        """``P[X <= x, Y = y]`` restricted to X (``y=None`` for the marginal)."""
        xa = np.clip(np.asarray(x, dtype=float), self.x_min, self.x_max)
        out = np.zeros_like(xa)
        for c in self._label_components(y):
            out = out + c.weight * (c.cdf(xa) - c.cdf(np.float64(self.x_min)))
        return out if np.ndim(x) else float(out)

    def mass(self, lo, hi, y: int | None = None):
        """``P[lo <= X < hi, Y = y]``; zero when ``hi <= lo``."""
        lo_a = np.asarray(lo, dtype=float)
        hi_a = np.asarray(hi, dtype=float)
        m = np.maximum(self.cdf(hi_a, y) - self.cdf(lo_a, y), 0.0)
        return m if (np.ndim(lo) or np.ndim(hi)) else float(m)

    def label_mass(self, y: int) -> float:
        return float(self.cdf(self.x_max, y))

    def log_odds(self, x):
        """``log pdf(x, 1) - log pdf(x, 0)``, computed stably in the tails."""
        xa = np.asarray(x, dtype=float)

        def _lse(y: int) -> np.ndarray:
            comps = self._label_components(y)
            if not comps:
                return np.full_like(xa, -np.inf)
            with np.errstate(divide="ignore"):
                terms = [np.log(c.weight) + c.logpdf(xa) for c in comps if c.weight > 0]
            return special.logsumexp(np.stack(terms), axis=0) if terms else np.full_like(xa, -np.inf)

        l1, l0 = _lse(1), _lse(0)
        with np.errstate(invalid="ignore"):
            out = l1 - l0
        # both densities vanish: no information, treat as even odds
        out = np.where(np.isneginf(l1) & np.isneginf(l0), 0.0, out)
        return out if np.ndim(x) else float(out)

    def posterior(self, x):
        """mu(x) = P[y = 1 | x]."""
        out = special.expit(np.asarray(self.log_odds(x), dtype=float))
        return out if np.ndim(x) else float(out)

    def posterior_is_increasing(self, points: int = 2001) -> bool:
        grid = np.linspace(self.x_min, self.x_max, points)
        return bool(np.all(np.diff(self.log_odds(grid)) > 0))

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, rng: "RandomSource | np.random.Generator") -> tuple[np.ndarray, np.ndarray]:
        """i.i.d. draws ``(x, y)`` of size ``n``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        gen = _as_generator(rng)
        weights = np.array([c.weight for c in self.components])
        which = gen.choice(len(self.components), size=n, p=weights / weights.sum())
        x = np.empty(n)
        y = np.empty(n, dtype=np.int8)
        for k, c in enumerate(self.components):
            idx = np.flatnonzero(which == k)
            x[idx] = c.sample(idx.size, gen)
            y[idx] = c.label
        return x, y

    def sample_given_label(
        self,
        n: int,
        y: int,
        rng: "RandomSource | np.random.Generator",
        lo: float | None = None,
        hi: float | None = None,
    ) -> np.ndarray:
        """Draws of x conditioned on the label and optionally on ``lo <= x < hi`` (rejection)."""
        comps = self._label_components(y)
        if not comps:
            raise DomainError(f"label {y} has zero mass")
        lo = self.x_min if lo is None else max(lo, self.x_min)
        hi = self.x_max if hi is None else min(hi, self.x_max)
        if self.mass(lo, hi, y) <= 0:
            raise DomainError("conditioning event has zero mass")
        gen = _as_generator(rng)
        weights = np.array([c.weight for c in comps])
        weights = weights / weights.sum()
        out: list[np.ndarray] = []
        have = 0
        while have < n:
            batch = max(2 * (n - have), 64)
            which = gen.choice(len(comps), size=batch, p=weights)
            x = np.empty(batch)
            for k, c in enumerate(comps):
                idx = np.flatnonzero(which == k)
                x[idx] = c.sample(idx.size, gen)
            x = x[(x >= lo) & (x < hi)]
            out.append(x)
            have += x.size
        return np.concatenate(out)[:n]


def pdf(base: BaseDistribution, x, y: int):
    """Joint density of ``(x, y)``; raises DomainError outside the support."""
    return base.pdf(x, y)


def sample_base(base: BaseDistribution, n: int, rng: "RandomSource") -> list[tuple[float, int]]:
    """``n`` i.i.d. ``(x, y)`` pairs from the base distribution."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x, y = base.sample(n, rng)
    return list(zip(x.tolist(), y.tolist()))


# ---------------------------------------------------------------------------
# cost


@dataclass(frozen=True)
class CostFunction:
    """Manipulation cost c(x, x') with reward ``gamma`` for a positive decision.

    ``kind`` is ``linear`` (alpha * |x - x'|), ``squared_difference``
    (|x^2 - x'^2|, valid on [0, inf)) or ``custom`` with a user callable,
    the latter mainly for exercising the validity checks.
    """

    kind: str = "linear"
    alpha: float = 1.0
    gamma: float = 1.0
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind == "linear":
            if not self.alpha > 0:
                raise ValueError("alpha must be positive")
        elif self.kind == "squared_difference":
            object.__setattr__(self, "domain", (0.0, math.inf))
        elif self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom cost needs fn")
        else:
            raise ValueError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def linear(cls, alpha: float = 1.0, gamma: float = 1.0) -> "CostFunction":
        return cls("linear", float(alpha), float(gamma))

    @classmethod
    def squared_difference(cls, gamma: float = 1.0) -> "CostFunction":
        return cls("squared_difference", 1.0, float(gamma))

    @classmethod
    def custom(cls, fn, gamma: float = 1.0, domain=(-math.inf, math.inf)) -> "CostFunction":
        return cls("custom", 1.0, float(gamma), fn, (float(domain[0]), float(domain[1])))

    @property
    def is_unit_linear(self) -> bool:
        return self.kind == "linear" and self.alpha == 1.0 and self.gamma == 1.0

    def __call__(self, x, x_prime):
        xa = np.asarray(x, dtype=float)
        xb = np.asarray(x_prime, dtype=float)
        if self.kind == "linear":
            out = self.alpha * np.abs(xa - xb)
        elif self.kind == "squared_difference":
            out = np.abs(xa * xa - xb * xb)
        else:
            out = np.asarray(self.fn(xa, xb), dtype=float)
        return out if (np.ndim(x) or np.ndim(x_prime)) else float(out)

    def describe(self) -> dict:
        d = {"kind": self.kind, "gamma": self.gamma}
        if self.kind == "linear":
            d["alpha"] = self.alpha
        return d


def _expand_and_bisect(g: Callable[[float], float], start: float, direction: float, bound: float) -> float:
    """First point beyond ``start`` (in ``direction``) where ``g`` reaches zero."""
    step = 1e-3
    prev = start
    for _ in range(80):
        cand = start + direction * step
        if direction * (cand - bound) >= 0:
            cand = bound
        val = g(cand)
        if val >= 0:
            lo, hi = (prev, cand) if direction > 0 else (cand, prev)
            return bisect(lambda t: g(t), lo, hi, BISECT_TOL, BISECT_MAX_ITER)
        if cand == bound:
            return bound
        prev = cand
        step *= 2.0
    raise InvariantViolation("cost never reaches the budget: not a valid manipulation cost")


def _check_segment_monotone(cost: CostFunction, x: float, end: float, samples: int = 17) -> None:
    if end == x:
        return
    ts = x + (end - x) * np.linspace(0.0, 1.0, samples)
    vals = np.array([cost(x, t) for t in ts])
    if abs(vals[0]) > 1e-12 or np.any(np.diff(vals) <= 0):
        raise InvariantViolation(f"cost is not monotone along the segment from {x} to {end}")


def reach_points_bisect(cost: CostFunction, x: float) -> tuple[float, float]:
    """Points ``l < x < u`` with ``c(l, x) = gamma`` and ``c(x, u) = gamma``.

    Found by bracket expansion and bisection on the extended real line.
    When the budget is never exhausted before the edge of the cost's
    domain (e.g. x near 0 for the squared-difference cost), the domain
    edge is returned.
    """
    x = float(x)
    lo_dom, hi_dom = cost.domain
    if not lo_dom <= x <= hi_dom:
        raise DomainError(f"x={x} outside the cost domain {cost.domain}")
    gam = cost.gamma
    u = _expand_and_bisect(lambda t: cost(x, t) - gam, x, 1.0, hi_dom)
    l = _expand_and_bisect(lambda t: cost(t, x) - gam, x, -1.0, lo_dom)
    _check_segment_monotone(cost, x, u)
    _check_segment_monotone(cost, x, l)
    return l, u


def reach_points(cost: CostFunction, x: float) -> tuple[float, float]:
    """Reach points of ``x`` under budget gamma.

    The built-in kinds have exact inverses; custom costs go through
    :func:`reach_points_bisect`, which also checks monotonicity.
    """
    if cost.kind == "custom":
        return reach_points_bisect(cost, x)
    l, u = reach_arrays(cost, np.float64(x))
    return float(l), float(u)


def reach_arrays(cost: CostFunction, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`reach_points` (closed forms for the built-in kinds)."""
    xa = np.asarray(x, dtype=float)
    if cost.kind == "linear":
        r = cost.gamma / cost.alpha
        return xa - r, xa + r
    if cost.kind == "squared_difference":
        if np.any(xa < 0):
            raise DomainError("squared-difference cost is only valid on [0, inf)")
        x2 = xa * xa
        return np.sqrt(np.maximum(x2 - cost.gamma, 0.0)), np.sqrt(x2 + cost.gamma)
    pts = [reach_points_bisect(cost, float(v)) for v in xa.ravel()]
    l = np.array([p[0] for p in pts]).reshape(xa.shape)
    u = np.array([p[1] for p in pts]).reshape(xa.shape)
    return l, u


@dataclass(frozen=True)
class CostValidityReport:
    valid: bool
    reason: str = ""
    witness: tuple[float, ...] = ()


def check_cost_validity(
    cost: CostFunction,
    interval: tuple[float, float] = DEFAULT_SUPPORT,
    trials: int = 2000,
    rng: "RandomSource | None" = None,
) -> CostValidityReport:
    """Sample points and triples to check c(x,x)=0, segment monotonicity and continuity."""
    lo = max(interval[0], cost.domain[0])
    hi = min(interval[1], cost.domain[1])
    gen = _as_generator(rng if rng is not None else RandomSource(0, 0))
    a = gen.uniform(lo, hi, trials)
    b = gen.uniform(lo, hi, trials)
    t = gen.uniform(0.02, 0.98, trials)
    mid = a + t * (b - a)

    diag = np.asarray(cost(a, a))
    if np.any(np.abs(diag) > 1e-12):
        k = int(np.argmax(np.abs(diag)))
        return CostValidityReport(False, "c(x, x) != 0", (float(a[k]),))

    c_ab = np.asarray(cost(a, b))
    c_am = np.asarray(cost(a, mid))
    bad = ~(c_am < c_ab) & (np.abs(a - b) > 1e-9)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        return CostValidityReport(False, "not increasing along segments", (float(a[k]), float(mid[k]), float(b[k])))

    h = 1e-9
    jump = np.abs(np.asarray(cost(a, b + h)) - c_ab)
    if np.any(jump > 1e-6):
        k = int(np.argmax(jump))
        return CostValidityReport(False, "discontinuous", (float(a[k]), float(b[k])))
    return CostValidityReport(True)


# ---------------------------------------------------------------------------
# classifier and randomness


@dataclass(frozen=True)
class ThresholdClassifier:
    theta: float
    bounds: tuple[float, float] = DEFAULT_THETA_BOUNDS

    def __post_init__(self) -> None:
        if not self.bounds[0] <= self.theta <= self.bounds[1]:
            raise DomainError(f"theta={self.theta} outside {self.bounds}")

    def predict(self, x):
        out = (np.asarray(x) >= self.theta).astype(np.int8)
        return out if np.ndim(x) else int(out)


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RandomSource:
    """Seeded, splittable stream identifier.

    Each ``(seed, stream_id)`` pair maps to its own Philox counter stream
    via ``SeedSequence(seed, spawn_key=(stream_id,))``; :meth:`generator`
    always restarts the stream from the beginning.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and 0 <= int(v) <= _MASK64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RandomSource":
        """Derived stream, distinct for each ``index`` and each parent stream."""
        mixed = _splitmix64(int(self.stream_id) ^ _splitmix64(int(index) + 1))
        return RandomSource(self.seed, mixed)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomSource or numpy Generator, got {type(rng).__name__}")


def default_theta_grid(lo: float = DEFAULT_THETA_BOUNDS[0], hi: float = DEFAULT_THETA_BOUNDS[1], step: float = 0.005) -> np.ndarray:
    """Evenly spaced grid including both ends; 601 points for the defaults."""
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 10)
