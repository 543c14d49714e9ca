from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfsim.core import RandomSource, UnsupportedConfiguration, default_theta_grid
from perfsim.dynamics import (
    Verdict,
    classify_trajectory,
    local_stability_scan,
    performative_optimum,
    rgd_trajectory,
    risk_curve,
    rrm_step,
    rrm_trajectory,
)
from perfsim.response import ResponseModel
from perfsim.risk import exact_pr

from _util import grid_close

STEP = 0.005


def _sawtooth(low, high, rounds, step=STEP, jitter=None):
    out, t, drops = [], high, 0
    for _ in range(rounds):
        if t + step <= high + 1e-12:
            t = t + step
        else:
            t = low if jitter is None else low + jitter[drops % len(jitter)]
            drops += 1
        out.append(round(t, 6))
    return np.array(out)


def test_classify_converged():
    th = np.r_[np.linspace(1.5, 1.0, 20), np.full(80, 1.0)]
    v = classify_trajectory(th, STEP)
    assert v.kind == "converged" and v.limit == 1.0
    assert v.tag().startswith("converged(limit=1")


def test_classify_slow_drift_not_converged():
    th = np.linspace(0.0, 2.0, 200)
    assert classify_trajectory(th, STEP).kind == "budget_exhausted"


def test_classify_sawtooth():
    th = _sawtooth(0.5, 0.895, 1000)
    v = classify_trajectory(th, STEP)
    assert v.kind == "oscillating"
    assert grid_close(v.low, 0.5, 1e-9) and grid_close(v.high, 0.895, 1e-9)
    assert v.period == pytest.approx(80.0, abs=1.0)


def test_classify_sawtooth_with_noisy_troughs():
    th = _sawtooth(0.5, 0.98, 1500, jitter=[-0.01, 0.0, 0.005, 0.01, -0.005])
    v = classify_trajectory(th, STEP)
    assert v.kind == "oscillating"
    assert grid_close(v.low, 0.5, 0.01) and grid_close(v.high, 0.98, 1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_classify_random_walk_not_oscillating(seed):
    gen = np.random.default_rng(seed)
    th = np.cumsum(gen.choice([-0.05, 0.05], 300))
    assert classify_trajectory(th, STEP).kind != "oscillating"


def test_classify_short():
    assert classify_trajectory([1.0, 1.0], STEP) == Verdict("budget_exhausted")


def test_rrm_step_non_strategic_goes_to_sl(base, cost):
    grid = default_theta_grid()
    nxt = rrm_step(ResponseModel.non_strategic(cost), base, 1.5, grid, 100_000, RandomSource(2))
    assert abs(nxt - 0.5) <= 0.02


def test_rrm_step_standard_moves_up_one_step(base, standard):
    # just past the stable point the empirical argmin sits at the current atom + one step
    grid = default_theta_grid()
    nxt = rrm_step(ResponseModel.mixture(0.5, standard), base, 0.7, grid, 100_000, RandomSource(3))
    assert grid_close(nxt, 0.705, 1e-9)


def test_rrm_tie_keeps_incumbent(base, cost):
    # with no negatives past 3 and no positives past 3 the risk is flat there
    grid = np.round(np.arange(3.0, 3.5, 0.005), 6)
    nxt = rrm_step(ResponseModel.standard(cost), base, 3.2, grid, 1000, RandomSource(4))
    assert nxt == 3.2


def test_rrm_trajectory_non_strategic_converges(base, cost):
    traj = rrm_trajectory(ResponseModel.non_strategic(cost), base, 1.5, 40, default_theta_grid(), 50_000, RandomSource(5))
    assert traj.verdict.kind == "converged"
    assert abs(traj.verdict.limit - 0.5) <= 0.01
    assert traj.thetas.size == 41 and traj.dpr.size == 41


def test_rrm_trajectory_deterministic_and_csv(base, standard):
    a = rrm_trajectory(standard, base, 0.5, 12, default_theta_grid(), 2000, RandomSource(6))
    b = rrm_trajectory(standard, base, 0.5, 12, default_theta_grid(), 2000, RandomSource(6))
    assert a.to_csv_string("p") == b.to_csv_string("p")
    lines = a.to_csv_string("p").splitlines()
    assert lines[0] == "# p" and lines[1] == "round,theta,dpr_at_theta,verdict"
    assert lines[2].startswith("0,0.5,")


def test_rrm_trajectory_rejects_short_budget(base, standard):
    with pytest.raises(ValueError):
        rrm_trajectory(standard, base, 0.5, 5, default_theta_grid(), 100, RandomSource(0))


# ---------------------------------------------------------------------------
# gradient dynamics


@pytest.mark.parametrize("theta0", [0.5, 1.2])
def test_rgd_noisy_converges_to_stable_region(base, cost, theta0):
    traj = rgd_trajectory(ResponseModel.noisy(cost, 0.3), base, theta0, 0.5, 60, 0.05, 50_000, RandomSource(1))
    assert traj.verdict.kind == "converged"
    assert 0.78 <= traj.verdict.limit <= 0.89


def test_rgd_non_strategic_converges_to_sl(base, cost):
    traj = rgd_trajectory(ResponseModel.non_strategic(cost), base, 1.2, 0.5, 60, 0.05, 50_000, RandomSource(1))
    assert traj.verdict.kind == "converged"
    assert abs(traj.verdict.limit - 0.5) <= 0.02


@pytest.mark.parametrize("p", [0.0, 0.5])
def test_rgd_refuses_atoms(base, standard, p):
    model = standard if p == 0 else ResponseModel.mixture(p, standard)
    with pytest.raises(UnsupportedConfiguration):
        rgd_trajectory(model, base, 1.0, 0.5, 10, 0.05, 100, RandomSource(0))


# ---------------------------------------------------------------------------
# stability and optimality


def test_stability_scan_noisy(base, cost):
    grid = default_theta_grid(0.0, 2.0)
    scan = local_stability_scan(ResponseModel.noisy(cost, 0.3), base, grid, 0.1, 100_000, RandomSource(8))
    stable = [pt.theta for pt in scan if pt.stable]
    assert stable and min(stable) >= 0.75 and max(stable) <= 0.92
    assert all(pt.margin <= 0 or pt.stable for pt in scan)


def test_stability_scan_rejects_tiny_neighbourhood(base, cost):
    with pytest.raises(ValueError):
        local_stability_scan(ResponseModel.non_strategic(cost), base, default_theta_grid(), 0.001, 100, RandomSource(0))


def test_stability_scan_subset(base, cost):
    scan = local_stability_scan(ResponseModel.non_strategic(cost), base, default_theta_grid(), 0.1, 100_000, RandomSource(9), thetas=[0.5, 1.5])
    assert [pt.stable for pt in scan] == [True, False]


def test_risk_curve_tracks_exact(base, standard):
    grid = np.array([0.5, 1.0, 1.5])
    counts = risk_curve(standard, base, grid, 100_000, RandomSource(10))
    for t, c in zip(grid, counts):
        assert abs(c / 100_000 - exact_pr(standard, base, t)) < 0.005


@pytest.mark.parametrize(
    "make, lo, hi",
    [
        (lambda c, s: s, 1.45, 1.55),
        (lambda c, s: ResponseModel.non_strategic(c), 0.45, 0.55),
        (lambda c, s: ResponseModel.noisy(c, 0.3), 0.78, 0.88),
    ],
)
def test_performative_optimum(base, cost, standard, make, lo, hi):
    grid = default_theta_grid(0.0, 2.0, 0.01)
    theta, risk = performative_optimum(make(cost, standard), base, grid, 100_000, RandomSource(0))
    assert lo <= theta <= hi
    assert risk.method == "monte_carlo" and risk.std_error > 0
