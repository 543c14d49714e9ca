"""Agent response types and the checks on their expenditure behaviour."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    DEFAULT_SUPPORT,
    DEFAULT_THETA_BOUNDS,
    BaseDistribution,
    CostFunction,
    RandomSource,
)

__all__ = [
    "ResponseModel",
    "AgentDraw",
    "AgentBatch",
    "draw_agents",
    "respond",
    "respond_array",
    "ExpenditureReport",
    "MonotonicityReport",
    "check_expenditure_constraint",
    "check_expenditure_monotonicity",
]

_KINDS = ("standard", "noisy", "non_strategic", "mixture")
# perceived thresholds are clamped this many noise scales beyond the support
CLAMP_SIGMAS = 6.0


@dataclass(frozen=True)
class ResponseModel:
    """How a population reacts to a deployed threshold.

    Build instances through the classmethods.  ``mixture(p, inner)`` sends
    a fraction ``p`` of agents to the non-strategic response and the rest
    to ``inner``, which may not itself be a mixture.
    """

    kind: str
    cost: CostFunction
    sigma: float = 0.0
    p: float = 0.0
    inner: "ResponseModel | None" = None
    support: tuple[float, float] = DEFAULT_SUPPORT

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown response kind {self.kind!r}")
        if self.kind == "noisy" and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("noisy response needs a finite sigma > 0")
        if self.kind == "mixture":
            if self.inner is None or self.inner.kind == "mixture":
                raise ValueError("mixture needs a non-mixture inner model")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError("mixture weight p must lie in [0, 1]")

    @classmethod
    def standard(cls, cost: CostFunction) -> "ResponseModel":
        return cls("standard", cost)

    @classmethod
    def noisy(cls, cost: CostFunction, sigma: float, support: tuple[float, float] = DEFAULT_SUPPORT) -> "ResponseModel":
        return cls("noisy", cost, sigma=float(sigma), support=(float(support[0]), float(support[1])))

    @classmethod
    def non_strategic(cls, cost: CostFunction) -> "ResponseModel":
        return cls("non_strategic", cost)

    @classmethod
    def mixture(cls, p: float, inner: "ResponseModel") -> "ResponseModel":
        return cls("mixture", inner.cost, p=float(p), inner=inner)

    @property
    def core(self) -> "ResponseModel":
        """The strategic component (self unless this is a mixture)."""
        return self.inner if self.kind == "mixture" else self

    @property
    def noise_sigma(self) -> float:
        return self.core.sigma if self.core.kind == "noisy" else 0.0

    @property
    def nonstrategic_fraction(self) -> float:
        if self.kind == "mixture":
            return self.p
        return 1.0 if self.kind == "non_strategic" else 0.0

    @property
    def is_smooth(self) -> bool:
        """Whether the aggregate response is free of atoms at the threshold."""
        if self.core.kind == "standard":
            return self.kind == "mixture" and self.p == 1.0
        return True

    @property
    def clamp_bounds(self) -> tuple[float, float]:
        pad = CLAMP_SIGMAS * self.noise_sigma
        return self.core.support[0] - pad, self.core.support[1] + pad

    def describe(self) -> dict:
        d: dict = {"kind": self.kind, "cost": self.cost.describe()}
        if self.kind == "noisy":
            d["sigma"] = self.sigma
        if self.kind == "mixture":
            d["p"] = self.p
            d["inner"] = self.inner.describe()
        return d

    def label(self) -> str:
        if self.kind == "noisy":
            return f"noisy(sigma={self.sigma:g})"
        if self.kind == "mixture":
            return f"mixture(p={self.p:g},{self.inner.label()})"
        return self.kind


@dataclass(frozen=True)
class AgentDraw:
    """A single agent: features, label, perception noise and strategic flag."""

    x: float
    y: int
    eta: float = 0.0
    strategic: bool = True


@dataclass(frozen=True)
class AgentBatch:
    x: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    strategic: np.ndarray

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __getitem__(self, i: int) -> AgentDraw:
        return AgentDraw(float(self.x[i]), int(self.y[i]), float(self.eta[i]), bool(self.strategic[i]))


def draw_agents(model: ResponseModel, base: BaseDistribution, n: int, rng: RandomSource) -> AgentBatch:
    """Draw ``n`` agents with their fixed traits.

    A single generator is consumed in a fixed order (base pair, a standard
    normal, a uniform) regardless of the model, so two models sharing a
    RandomSource see the same population and the same noise shocks.
    """
    gen = rng.generator()
    x, y = base.sample(n, gen)
    z = gen.standard_normal(n)
    u = gen.random(n)
    eta = model.noise_sigma * z
    strategic = u >= model.nonstrategic_fraction
    return AgentBatch(x, y, eta, strategic)


def respond_array(model: ResponseModel, x: np.ndarray, eta: np.ndarray, strategic: np.ndarray, theta: float) -> np.ndarray:
    """Vectorised response; the label is deliberately not an argument."""
    x = np.asarray(x, dtype=float)
    theta = float(theta)
    kind = model.kind
    if kind == "non_strategic":
        return x.copy()
    if kind == "mixture":
        inner = respond_array(model.inner, x, eta, strategic, theta)
        return np.where(strategic, inner, x)
    if kind == "standard":
        move = (x < theta) & (model.cost(x, theta) <= model.cost.gamma)
        return np.where(move, theta, x)
    lo, hi = model.clamp_bounds
    target = np.clip(theta + np.asarray(eta, dtype=float), lo, hi)
    move = (x < target) & (model.cost(x, target) <= model.cost.gamma)
    return np.where(move, target, x)


def respond(model: ResponseModel, draw: AgentDraw, theta: float) -> float:
    """Post-response features of one agent facing threshold ``theta``."""
    out = respond_array(model, np.array([draw.x]), np.array([draw.eta]), np.array([draw.strategic]), theta)
    return float(out[0])


# ---------------------------------------------------------------------------
# expenditure checks

RespondFn = Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ExpenditureReport:
    passed: bool
    max_expenditure: float
    witness: tuple[float, float, float] | None = None  # (x, theta, eta)


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    witness: tuple[float, float, float, float] | None = None  # (x, eta, theta_rejected, theta_accepted)


def _respond_fn(model: ResponseModel, override: RespondFn | None) -> RespondFn:
    if override is not None:
        return override
    return lambda x, eta, s, theta: respond_array(model, x, eta, s, theta)


def check_expenditure_constraint(
    model: ResponseModel,
    trials: int,
    rng: RandomSource,
    x_range: tuple[float, float] = DEFAULT_SUPPORT,
    theta_range: tuple[float, float] = DEFAULT_THETA_BOUNDS,
    respond_fn: RespondFn | None = None,
) -> ExpenditureReport:
    """Sample (x, theta, eta) triples and verify c(x, x') <= gamma.

    ``respond_fn`` substitutes a different response rule, which is how
    deliberately broken test doubles are checked.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = rng.generator()
    x = gen.uniform(*x_range, trials)
    theta = gen.uniform(*theta_range, trials)
    eta = model.noise_sigma * gen.standard_normal(trials)
    strategic = gen.random(trials) >= model.nonstrategic_fraction
    fn = _respond_fn(model, respond_fn)
    spend = np.array([float(model.cost(x[i], fn(x[i : i + 1], eta[i : i + 1], strategic[i : i + 1], theta[i])[0])) for i in range(trials)])
    worst = int(np.argmax(spend))
    if spend[worst] <= model.cost.gamma + 1e-12:
        return ExpenditureReport(True, float(spend[worst]))
    return ExpenditureReport(False, float(spend[worst]), (float(x[worst]), float(theta[worst]), float(eta[worst])))


def check_expenditure_monotonicity(
    model: ResponseModel,
    theta_grid,
    trials: int,
    rng: RandomSource,
    agents: AgentBatch | None = None,
    x_range: tuple[float, float] = DEFAULT_SUPPORT,
    respond_fn: RespondFn | None = None,
) -> MonotonicityReport:
    """Replay fixed agents across an ascending grid; acceptance must never switch back on."""
    grid = np.asarray(theta_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("theta_grid must be sorted ascending")
    if agents is None:
        gen = rng.generator()
        x = gen.uniform(*x_range, trials)
        eta = model.noise_sigma * gen.standard_normal(trials)
        strategic = gen.random(trials) >= model.nonstrategic_fraction
        agents = AgentBatch(x, np.zeros(trials, dtype=np.int8), eta, strategic)
    fn = _respond_fn(model, respond_fn)
    accepted = np.column_stack([fn(agents.x, agents.eta, agents.strategic, t) >= t for t in grid])
    rises = np.diff(accepted.astype(np.int8), axis=1) > 0
    if not rises.any():
        return MonotonicityReport(True)
    i, j = map(int, np.argwhere(rises)[0])
    return MonotonicityReport(False, (float(agents.x[i]), float(agents.eta[i]), float(grid[j]), float(grid[j + 1])))
