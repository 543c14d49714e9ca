"""Bind validated configs to library calls and write plot-ready outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .aggregate import density_profile, smoothness_diagnostic, wasserstein_counterexample
from .config import ScenarioConfig
from .core import DomainError, RandomSource
from .dynamics import local_stability_scan, performative_optimum, rrm_trajectory
from .emit import provenance_line, write_csv, write_json, write_text
from .estimation import ResponseOracle, construct_theta0, estimate_optimum_via_oracle
from .response import ResponseModel
from .risk import exact_pr, social_burden, solve_tau

__all__ = ["run_scenario"]


def _tag(value: float) -> str:
    return f"{value:g}"


def _strategic(cost, sigma: float, support) -> ResponseModel:
    return ResponseModel.standard(cost) if sigma == 0 else ResponseModel.noisy(cost, sigma, support)


def _with_p(p: float, inner: ResponseModel) -> ResponseModel:
    return inner if p == 0 else ResponseModel.mixture(p, inner)


def _oscillation(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    base, cost, grid = cfg.base.build(), cfg.cost.build(), cfg.grid.build()
    root = RandomSource(cfg.seed)
    written, summary = [], []
    for k, p in enumerate(cfg.p):
        model = _with_p(p, ResponseModel.standard(cost))
        traj = rrm_trajectory(model, base, cfg.theta0, cfg.rounds, grid, cfg.n, root.child(k))
        written.append(write_text(out / f"trajectory_p{_tag(p)}.csv", traj.to_csv_string(prov)))
        try:
            tau = solve_tau(base, cost, p, cfg.grid.hi)
        except DomainError:
            tau = float("nan")
        v = traj.verdict
        summary.append((p, v.kind, v.limit, v.low, v.high, v.period, tau))
    header = ("p", "verdict", "limit", "low", "high", "period", "tau")
    written.append(write_csv(out / "oscillation_summary.csv", header, summary, prov))
    return written


def _densities(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    base, cost = cfg.base.build(), cfg.cost.build()
    sigmas = sorted(set(cfg.sigma) | {0.0})
    pad = 6.0 * max(sigmas)
    grid = np.linspace(base.x_min - pad, base.x_max + pad, cfg.density_points)
    root = RandomSource(cfg.seed)
    written, summary = [], []
    for i, theta in enumerate(cfg.thetas):
        for sigma in sigmas:
            model = _strategic(cost, sigma, base.support)
            name = "standard" if sigma == 0 else f"noisy_sigma{_tag(sigma)}"
            prof = density_profile(model, base, theta, grid, cfg.n, root.child(i))
            written.append(write_text(out / f"density_{name}_theta{_tag(theta)}.csv", prof.to_csv_string(prov)))
            summary.append((name, sigma, theta, len(prof.point_masses), prof.total_mass(), float(prof.marginal.max())))
    header = ("model", "sigma", "theta", "atoms", "total_mass", "max_density")
    written.append(write_csv(out / "densities_summary.csv", header, summary, prov))
    return written


def _optima_burden(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    base, cost, grid = cfg.base.build(), cfg.cost.build(), cfg.grid.build()
    rng = RandomSource(cfg.seed)
    rows = []
    for sigma in sorted(set(cfg.sigma) | {0.0}):
        for p in cfg.p:
            model = _with_p(p, _strategic(cost, sigma, base.support))
            theta, risk = performative_optimum(model, base, grid, cfg.n, rng)
            rows.append((model.label(), p, sigma, theta, risk.value, risk.std_error, social_burden(base, cost, theta)))
    header = ("model", "p", "sigma", "theta_po", "risk", "risk_se", "burden")
    return [write_csv(out / "optima_burden.csv", header, rows, prov)]


def _smoothness(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    base, cost, grid = cfg.base.build(), cfg.cost.build(), cfg.grid.build()
    models = [ResponseModel.noisy(cost, s, base.support) for s in cfg.sigma if s > 0]
    models.append(ResponseModel.non_strategic(cost))
    models += [ResponseModel.mixture(p, ResponseModel.standard(cost)) for p in cfg.p if 0 < p < 1]
    root = RandomSource(cfg.seed)
    step = float(grid[1] - grid[0])
    reports = []
    for j, model in enumerate(models):
        for i, theta in enumerate(cfg.thetas):
            rep = smoothness_diagnostic(model, base, theta, grid, cfg.delta, cfg.n, root.child(100 * j + i))
            reports.append({"model": model.label(), "theta": theta, "smooth": rep.smooth, "flags": list(rep.flags)})
        scan = local_stability_scan(model, base, grid, 2 * step, cfg.n, root.child(100 * j + 99))
        stable = [pt.theta for pt in scan if pt.stable]
        reports.append({"model": model.label(), "stable_points": len(stable), "stable_range": [min(stable), max(stable)] if stable else []})
    return [write_json(out / "smoothness.json", {"delta": cfg.delta, "reports": reports}, prov)]


def _estimation(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    base = cfg.base.build()
    root = RandomSource(cfg.seed)
    grid = cfg.grid.build()
    reports = []
    for a, alpha in enumerate(cfg.alphas):
        cost = cfg.cost.model_copy(update={"alpha": alpha}).build()
        hidden = ResponseModel.standard(cost)
        best = min(exact_pr(hidden, base, t) for t in grid)
        theta0 = construct_theta0(base, cost, (cfg.grid.lo, cfg.grid.hi))
        for t in range(cfg.trials):
            stream = root.child(1000 * a + t)
            oracle = ResponseOracle(hidden, stream.child(0))
            est = estimate_optimum_via_oracle(oracle, base, cost, cfg.epsilon, theta0, stream.child(1))
            rep = est.report()
            rep.update(
                epsilon=cfg.epsilon,
                alpha=alpha,
                trial=t,
                theta0=list(theta0),
                salient=list(est.region.salient),
                pr_true=exact_pr(hidden, base, est.theta_hat),
                pr_true_bound=best + cfg.epsilon,
            )
            reports.append(rep)
    return [write_json(out / "estimation.json", {"reports": reports}, prov)]


def _counterexample(cfg: ScenarioConfig, out: Path, prov: str) -> list[Path]:
    rows = wasserstein_counterexample(cfg.epsilons, n=cfg.n)
    return [write_csv(out / "counterexample.csv", ("epsilon", "ratio"), rows, prov)]


_RUNNERS = {
    "oscillation": _oscillation,
    "densities": _densities,
    "optima_burden": _optima_burden,
    "smoothness": _smoothness,
    "estimation": _estimation,
    "counterexample": _counterexample,
}


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path) -> list[Path]:
    """Run one scenario and return the files written (in write order)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance_line(cfg.sha256(), cfg.seed, cfg.scenario)
    return _RUNNERS[cfg.scenario](cfg, out, prov)

