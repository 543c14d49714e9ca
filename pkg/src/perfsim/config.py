"""Scenario configuration schema (strict JSON)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .core import BaseDistribution, CostFunction, default_theta_grid

SCENARIOS = ("oscillation", "densities", "optima_burden", "smoothness", "estimation", "counterexample")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ComponentSpec(_Strict):
    label: Literal[0, 1]
    weight: float = Field(ge=0.0, le=1.0)
    kind: Literal["gaussian", "uniform"]
    mean: Optional[float] = None
    std: Optional[float] = Field(default=None, gt=0.0)
    lo: Optional[float] = None
    hi: Optional[float] = None

    @model_validator(mode="after")
    def _params(self) -> "ComponentSpec":
        if self.kind == "gaussian" and (self.mean is None or self.std is None):
            raise ValueError("gaussian component needs mean and std")
        if self.kind == "uniform" and (self.lo is None or self.hi is None or not self.lo < self.hi):
            raise ValueError("uniform component needs lo < hi")
        return self


class BaseSpec(_Strict):
    components: list[ComponentSpec] = Field(
        default_factory=lambda: [
            ComponentSpec(label=0, weight=0.5, kind="gaussian", mean=0.0, std=1.0 / 3.0),
            ComponentSpec(label=1, weight=0.5, kind="gaussian", mean=1.0, std=1.0 / 3.0),
        ],
        min_length=1,
    )
    support: tuple[float, float] = (-5.0, 6.0)

    def build(self) -> BaseDistribution:
        return BaseDistribution.from_spec([c.model_dump() for c in self.components], self.support)


class CostSpec(_Strict):
    kind: Literal["linear", "squared_difference"] = "linear"
    alpha: float = Field(default=1.0, gt=0.0)
    gamma: float = Field(default=1.0, gt=0.0)

    def build(self) -> CostFunction:
        if self.kind == "linear":
            return CostFunction.linear(self.alpha, self.gamma)
        return CostFunction.squared_difference(self.gamma)


class GridSpec(_Strict):
    lo: float = -0.5
    hi: float = 2.5
    step: float = Field(default=0.005, gt=0.0)

    @model_validator(mode="after")
    def _order(self) -> "GridSpec":
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        return self

    def build(self):
        return default_theta_grid(self.lo, self.hi, self.step)


class ScenarioConfig(_Strict):
    scenario: Literal["oscillation", "densities", "optima_burden", "smoothness", "estimation", "counterexample"]
    base: BaseSpec = Field(default_factory=BaseSpec)
    cost: CostSpec = Field(default_factory=CostSpec)
    p: list[float] = Field(default_factory=lambda: [0.0])
    sigma: list[float] = Field(default_factory=list)
    thetas: list[float] = Field(default_factory=lambda: [1.0])
    grid: GridSpec = Field(default_factory=GridSpec)
    n: int = Field(default=100_000, ge=1, le=50_000_000)
    rounds: int = Field(default=200, ge=10)
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    theta0: float = 0.5
    density_points: int = Field(default=1201, ge=11)
    delta: float = Field(default=0.02, gt=0.0)
    epsilon: float = Field(default=0.02, gt=0.0, lt=1.0)
    alphas: list[float] = Field(default_factory=lambda: [1.0])
    trials: int = Field(default=1, ge=1)
    epsilons: list[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4])

    @model_validator(mode="after")
    def _ranges(self) -> "ScenarioConfig":
        if any(not 0.0 <= v <= 1.0 for v in self.p):
            raise ValueError("every p must lie in [0, 1]")
        if any(not v >= 0.0 for v in self.sigma):
            raise ValueError("every sigma must be >= 0 (0 selects the standard model)")
        if any(not v > 0.0 for v in self.alphas):
            raise ValueError("every alpha must be positive")
        if any(not 0.0 < v for v in self.epsilons):
            raise ValueError("every epsilon must be positive")
        self.base.build()  # surfaces weight and support errors at load time
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


BUNDLED_DIR = Path(__file__).with_name("configs")


def resolve_config_path(name: str | Path) -> Path:
    """A filesystem path, or the name of a bundled config (with or without ``.json``)."""
    path = Path(name)
    if path.exists():
        return path
    for cand in (BUNDLED_DIR / str(name), BUNDLED_DIR / f"{name}.json"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"config not found: {name}")


def load_config(path: str | Path, seed: int | None = None, samples: int | None = None) -> ScenarioConfig:
    """Parse and validate a config file; CLI overrides are validated too."""
    text = resolve_config_path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("config root must be a JSON object")
    if seed is not None:
        data["seed"] = seed
    if samples is not None:
        data["n"] = samples
    return ScenarioConfig.model_validate(data)
