from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from perfsim.aggregate import AggregateSample, sample_map
from perfsim.core import CostFunction, RandomSource, UnsupportedConfiguration
from perfsim.response import ResponseModel
from perfsim.risk import (
    RiskEstimate,
    decoupled_pr,
    dpr_counts,
    exact_pr,
    gamma_ratio,
    misclassified_count,
    nr_pr_closed_form,
    performative_risk,
    sm_pr_exact,
    social_burden,
    solve_tau,
    solve_theta_ps_sm,
    solve_theta_sl,
    z_function,
)

S = 1.0 / 3.0


def _pdf(x, y):
    return 0.5 * stats.norm.pdf(x, float(y), S)


def _noisy_pr_oracle(sigma, theta):
    # oracle: integrate error probability over x with scipy quad and normal CDFs
    def accept(x):
        if x >= theta:
            return 1.0
        s = x - theta + 1.0
        return 0.0 if s < 0 else stats.norm.cdf(s / sigma) - 0.5

    f = lambda x: _pdf(x, 0) * accept(x) + _pdf(x, 1) * (1.0 - accept(x))
    pts = [theta - 1.0, theta, 0.0, 1.0]
    val, _ = integrate.quad(f, -5, 6, points=pts, limit=400, epsabs=1e-12)
    return val


@settings(max_examples=50, deadline=None)
@given(
    x=st.lists(st.floats(-3, 3), min_size=1, max_size=40),
    data=st.data(),
)
def test_dpr_counts_match_brute_force(x, data):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(x), max_size=len(x)))
    t = sorted(set(data.draw(st.lists(st.floats(-3, 3), min_size=1, max_size=8))))
    sample = AggregateSample(0.0, np.array(x), np.array(y, dtype=np.int8))
    xa, ya = np.array(x), np.array(y)
    brute = [int(np.sum((ya == 0) & (xa >= tt)) + np.sum((ya == 1) & (xa < tt))) for tt in t]
    np.testing.assert_array_equal(dpr_counts(sample, t), brute)
    assert misclassified_count(sample, t[0]) == brute[0]


def test_dpr_counts_unsorted_path():
    sample = AggregateSample(0.0, np.array([0.0, 1.0, 2.0]), np.array([0, 1, 0], dtype=np.int8))
    np.testing.assert_array_equal(dpr_counts(sample, [1.5, 0.5]), [2, 1])


def test_risk_estimate_se():
    r = RiskEstimate.monte_carlo(250, 1000)
    assert r.value == 0.25 and r.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 1000))
    assert RiskEstimate.closed_form(0.1).std_error == 0.0


def test_theta_sl_exact(base):
    assert solve_theta_sl(base) == pytest.approx(0.5, abs=1e-12)


def test_theta_ps_standard(base, cost):
    assert solve_theta_ps_sm(base, cost) == pytest.approx(1.0, abs=1e-6)
    assert gamma_ratio(base, cost, 1.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("theta", [0.5, 1.0, 1.5, 2.0])
def test_sm_pr_matches_normal_cdfs(base, cost, theta):
    lo = theta - 1.0
    want = 0.5 * (stats.norm.sf(lo, 0, S) + stats.norm.cdf(lo, 1, S))
    assert sm_pr_exact(base, cost, theta) == pytest.approx(want, abs=1e-9)


def test_sm_pr_frozen(base, cost):
    assert sm_pr_exact(base, cost, 1.5) == pytest.approx(0.066807, abs=1e-6)
    assert sm_pr_exact(base, cost, 0.5) == pytest.approx(0.466598, abs=1e-6)


@pytest.mark.parametrize("sigma", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("theta", [0.8, 1.0, 1.2])
def test_nr_pr_closed_form_matches_quad(base, sigma, theta):
    got = nr_pr_closed_form(base, sigma, theta).value
    assert got == pytest.approx(_noisy_pr_oracle(sigma, theta), abs=1e-6)


def test_nr_pr_closed_form_matches_monte_carlo(base, cost):
    model = ResponseModel.noisy(cost, 0.3)
    mc = performative_risk(model, base, 1.0, 200_000, RandomSource(2))
    cf = nr_pr_closed_form(base, 0.3, 1.0).value
    assert abs(mc.value - cf) <= 3 * mc.std_error


def test_noisy_small_sigma_limit(base, cost):
    # as the noise vanishes the noisy risk keeps half the gaming strip rejected
    theta = 1.5
    strip = 0.5 * (base.mass(theta - 1, theta, 1) - base.mass(theta - 1, theta, 0))
    want = sm_pr_exact(base, cost, theta) + strip
    assert nr_pr_closed_form(base, 1e-6, theta).value == pytest.approx(want, abs=1e-4)
    assert want == pytest.approx(0.2667, abs=1e-4)


def test_nr_pr_requires_unit_cost(base):
    with pytest.raises(UnsupportedConfiguration):
        nr_pr_closed_form(base, 0.3, 1.0, CostFunction.linear(2.0))


@pytest.mark.parametrize("theta", [0.7, 1.0, 1.4])
def test_exact_pr_agrees_with_monte_carlo(base, cost, theta):
    for model in (
        ResponseModel.standard(cost),
        ResponseModel.non_strategic(cost),
        ResponseModel.mixture(0.3, ResponseModel.standard(cost)),
    ):
        mc = performative_risk(model, base, theta, 100_000, RandomSource(7))
        assert abs(mc.value - exact_pr(model, base, theta)) <= 3.5 * mc.std_error


def test_decoupled_pr_on_fixed_sample(base, standard):
    rng = RandomSource(3)
    d = decoupled_pr(standard, base, 1.0, 0.5, 10_000, rng)
    s = sample_map(standard, base, 1.0, 10_000, rng)
    assert d.value == misclassified_count(s, 0.5) / 10_000


# ---------------------------------------------------------------------------
# oscillation endpoints

TAU = {0.01: 0.99844, 0.1: 0.98364, 0.3: 0.94487, 0.5: 0.89431, 0.7: 0.82284, 0.9: 0.69990, 1.0: 0.5}


@pytest.mark.parametrize("p, tau", sorted(TAU.items()))
def test_tau_frozen(base, cost, p, tau):
    assert solve_tau(base, cost, p) == pytest.approx(tau, abs=1e-5)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_tau_is_root_of_z(base, cost, p):
    t = solve_tau(base, cost, p)
    assert abs(z_function(base, cost, p, t)) < 1e-9


def test_tau_decreasing_in_p(base, cost):
    taus = [solve_tau(base, cost, p) for p in np.linspace(0, 1, 11)]
    assert np.all(np.diff(taus) < 0)
    assert taus[0] == pytest.approx(1.0, abs=1e-6)


def test_z_sign_between_endpoints(base, cost):
    assert z_function(base, cost, 0.5, 0.7) < 0
    assert z_function(base, cost, 0.5, 0.95) > 0


def test_tau_rejects_bad_p(base, cost):
    with pytest.raises(ValueError):
        solve_tau(base, cost, 1.5)


# ---------------------------------------------------------------------------
# burden


def _burden_oracle(theta):
    # E[(theta - X)+] for X ~ N(1, 1/3), truncation at the support edge is negligible
    d = (theta - 1.0) / S
    return S * stats.norm.pdf(d) + (theta - 1.0) * stats.norm.cdf(d)


@pytest.mark.parametrize("theta", [0.5, 0.735, 0.83, 1.0, 1.5])
def test_burden_matches_normal_partial_moment(base, cost, theta):
    assert social_burden(base, cost, theta) == pytest.approx(_burden_oracle(theta), abs=1e-6)


def test_burden_frozen(base, cost):
    assert social_burden(base, cost, 0.5) == pytest.approx(0.0097687, abs=1e-6)
    assert social_burden(base, cost, 0.83) == pytest.approx(0.0649, abs=1e-4)
    assert social_burden(base, cost, 0.735) == pytest.approx(0.0404, abs=1e-4)
    assert social_burden(base, cost, -6.0) == 0.0


def test_burden_increasing(base, cost):
    b = [social_burden(base, cost, t) for t in np.linspace(-0.5, 2.5, 31)]
    assert np.all(np.diff(b) > 0)
