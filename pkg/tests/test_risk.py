import json
import math

import numpy as np
import pytest
from brute import brute_folded
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from cascade_risk.conditional import FailureObservation, init_state
from cascade_risk.covariance import NetworkModel, steady_state_covariance
from cascade_risk.errors import DegenerateCorrelation, InvalidSign
from cascade_risk.graph import GraphSpec, Topology
from cascade_risk.risk import (
    Branch,
    CovSign,
    RangeBoundedTail,
    RiskLevel,
    RiskParams,
    assess,
    best_achievable_bound,
    best_achievable_complete,
    bound_validation_sweep,
    cascading_risk_profile,
    folded_avar,
    folded_tail,
    folded_var,
    iota,
    kappa,
    range_bounded_risk,
    range_bounded_tail,
    risk_level,
    sigma_min,
)

DEFAULT = RiskParams()


def _complete_sigma(n=20, tau=0.05, b=0.01):
    return steady_state_covariance(NetworkModel.build(GraphSpec(n, Topology.COMPLETE), tau, b))


# folded normal


def test_folded_examples(oracle):
    assert folded_var(0.0, 1.0, 0.5) == pytest.approx(oracle["folded_var_mu0_eps0.5"], rel=1e-12)
    assert folded_var(0.0, 1.0, 0.1) == pytest.approx(oracle["folded_var_mu0_eps0.1"], rel=1e-12)
    assert folded_avar(0.0, 1.0, 0.1) == pytest.approx(oracle["folded_avar_mu0_eps0.1"], rel=1e-12)
    assert folded_var(-0.7, 0.3, 0.05) == pytest.approx(oracle["folded_var_mu-0.7_s0.3_eps0.05"], rel=1e-12)
    assert folded_avar(-0.7, 0.3, 0.05) == pytest.approx(oracle["folded_avar_mu-0.7_s0.3_eps0.05"], rel=1e-12)


@given(st.floats(-10, 10), st.floats(1e-4, 10), st.floats(1e-4, 0.9999))
def test_erf_sum_residual(mu, s, eps):
    g = folded_var(mu, s, eps)
    lhs = math.erf((g - mu) / (math.sqrt(2) * s)) + math.erf((g + mu) / (math.sqrt(2) * s))
    assert g >= 0
    # one ulp of gamma moves the erf-sum by slope * ulp; below that no double can do better
    slope = math.sqrt(2 / math.pi) / s * (math.exp(-((g - mu) ** 2) / (2 * s * s)) + math.exp(-((g + mu) ** 2) / (2 * s * s)))
    assert abs(lhs - 2 * (1 - eps)) <= max(1e-12, 2 * slope * math.ulp(g))
    if abs(mu) / s < 1e3:
        assert abs(lhs - 2 * (1 - eps)) <= 1e-12


@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(1e-3, 0.999), st.floats(1e-3, 1e3))
def test_scale_equivariance(mu, s, eps, a):
    assert folded_var(a * mu, a * s, eps) == pytest.approx(a * folded_var(mu, s, eps), rel=1e-9, abs=1e-300)
    assert folded_avar(a * mu, a * s, eps) == pytest.approx(a * folded_avar(mu, s, eps), rel=1e-9)


@given(st.floats(-20, 20), st.floats(1e-6, 20), st.floats(1e-6, 0.999999))
def test_avar_dominates_var(mu, s, eps):
    assert folded_avar(mu, s, eps) >= folded_var(mu, s, eps) * (1 - 1e-12) >= 0


def test_var_vanishes_as_eps_goes_to_one():
    vals = [folded_var(0.3, 1.0, 1 - d) for d in (1e-1, 1e-3, 1e-6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-5


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 3), st.floats(0.01, 0.9))
def test_against_brute_force_quadrature(mu, s, eps):
    g, a = brute_folded(mu, s, eps)
    assert folded_var(mu, s, eps) == pytest.approx(g, rel=1e-9, abs=1e-12 * s)
    assert folded_avar(mu, s, eps) == pytest.approx(a, rel=1e-9)


def test_folded_tail_is_a_probability():
    assert folded_tail(0.0, 0.4, 1.0) == pytest.approx(1.0)
    assert folded_tail(50.0, 0.4, 1.0) == 0.0


def test_folded_input_validation():
    with pytest.raises(ValueError):
        folded_var(0.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        folded_var(0.0, 1.0, 1.0)


# risk level map


def test_risk_level_branches():
    assert risk_level(2.0, DEFAULT) == RiskLevel(Branch.FINITE, 998.0)
    assert risk_level(0.004, DEFAULT).branch is Branch.ZERO
    assert risk_level(4.0, DEFAULT).branch is Branch.INFINITE
    assert risk_level(4.0, DEFAULT).value == math.inf
    assert risk_level(0.001, DEFAULT).value == 0.0


@given(st.floats(0, 10), st.floats(0, 10))
def test_risk_level_is_monotone(a, b):
    lo, hi = sorted((a, b))
    assert risk_level(lo, DEFAULT) <= risk_level(hi, DEFAULT)


def test_risk_level_ordering_and_json():
    zero, mid, inf = RiskLevel.zero(), RiskLevel(Branch.FINITE, 3.0), RiskLevel(Branch.INFINITE)
    assert zero < mid < inf
    assert sorted([inf, zero, mid]) == [zero, mid, inf]
    assert inf.to_json_value() == "inf" and mid.to_json_value() == 3.0


@pytest.mark.parametrize("kw", [dict(c=0), dict(alpha=1.0), dict(epsilon=0.0), dict(epsilon=1.0)])
def test_risk_params_validation(kw):
    with pytest.raises(ValueError):
        RiskParams(**kw)


def test_assess_point_mass():
    a = assess(-0.5, 0.0, DEFAULT)
    assert a.var == a.avar == 0.5


# profiles


def test_complete_profile(oracle):
    prof = cascading_risk_profile(_complete_sigma(), FailureObservation((1,), (4.0,)), DEFAULT)
    levels = prof.levels
    assert levels[1] == 0.0
    others = np.delete(levels, 1)
    assert np.ptp(others) <= 1e-10 * others[0]
    assert others[0] == pytest.approx(oracle["complete20_m1_level"], rel=1e-9)
    entry = prof.entries[0].assessment
    assert entry.var == pytest.approx(oracle["complete20_m1_var"], rel=1e-11)
    assert entry.avar == pytest.approx(oracle["complete20_m1_avar"], rel=1e-11)


def test_complete_profile_location_invariance():
    sigma = _complete_sigma()
    a = cascading_risk_profile(sigma, FailureObservation((1,), (4.0,)), DEFAULT).levels
    b = cascading_risk_profile(sigma, FailureObservation((13,), (4.0,)), DEFAULT).levels
    np.testing.assert_allclose(np.sort(a), np.sort(b), rtol=1e-10)


def test_small_noise_limit():
    # b -> 0 leaves a point mass at mu = -4/19
    sigma = _complete_sigma(b=1e-6)
    prof = cascading_risk_profile(sigma, FailureObservation((0,), (4.0,)), DEFAULT)
    mu = 4 / 19
    assert prof.levels[1] == pytest.approx((1000 * mu - 4) / (4 - mu), rel=1e-4)


def test_profile_exports():
    prof = cascading_risk_profile(_complete_sigma(), FailureObservation((0,), (4.0,)), RiskParams(c=0.1, alpha=10))
    recs = json.loads(prof.to_json())
    assert recs[0] == {"agent": 0, "var": 0.0, "avar": 0.0, "level": 0.0, "branch": "observed"}
    assert recs[1]["level"] == "inf" and recs[1]["branch"] == "infinite"
    lines = prof.to_csv().split("\n")
    assert lines[0] == "agent,var,avar,level,branch"
    assert lines[2].endswith(",inf,infinite")


# range-bounded information


def test_range_tail_against_joint_quadrature(oracle):
    sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert RangeBoundedTail(1.0, 1.0, 0.5, 1.0).exceedance(1.0) == pytest.approx(oracle["range_tail_rho0.5_u1_z1"], rel=1e-10)
    assert RangeBoundedTail(1.0, 1.0, 0.5, 2.0).exceedance(0.5) == pytest.approx(oracle["range_tail_rho0.5_u2_z0.5"], rel=1e-10)
    # the threshold comes from the level set c (delta + 1) / (delta + alpha)
    params = RiskParams(c=2.0, alpha=3.0)
    assert range_bounded_tail(sigma, 0, 1.0, 1, params).threshold == pytest.approx(1.0)


def test_independent_pair_reduces_to_folded_var():
    sigma = np.diag([2.0, 0.3])
    r = range_bounded_risk(sigma, 0, 50.0, 1, DEFAULT)
    assert r.var == pytest.approx(folded_var(0.0, math.sqrt(0.3), 0.1), rel=1e-8)
    assert r.avar == pytest.approx(folded_avar(0.0, math.sqrt(0.3), 0.1), rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(0, 5000))
def test_range_tail_is_a_decreasing_probability(rho, delta):
    sigma = np.array([[1.0, rho], [rho, 1.0]])
    tail = range_bounded_tail(sigma, 0, delta, 1, DEFAULT)
    zs = np.linspace(0, 10, 21)
    p = [tail.exceedance(z) for z in zs]
    assert p[0] == 1.0
    assert all(0 <= x <= 1 for x in p)
    assert all(a >= b - 1e-12 for a, b in zip(p, p[1:]))
    assert p[-1] < 1e-6


def test_range_bounded_avar_against_double_integral():
    """Nested 2-D quadrature of the joint density, the direct route."""
    rho, u, eps = 0.6, 0.8, 0.1
    tail = RangeBoundedTail(1.0, 1.0, rho, u)
    v = tail.var(eps)
    joint = lambda yj, yi: stats.multivariate_normal.pdf([yi, yj], cov=[[1, rho], [rho, 1]])
    # |y_i| > u and |y_j| > v, using the symmetry (y_i, y_j) -> (-y_i, -y_j)
    num = 0.0
    for sj in (1, -1):
        f = lambda yj, yi, sj=sj: abs(yj) * joint(sj * yj, yi)
        num += integrate.dblquad(f, u, 12, v, 12, epsabs=1e-12, epsrel=1e-10)[0]
        num += integrate.dblquad(f, -12, -u, v, 12, epsabs=1e-12, epsrel=1e-10)[0]
    den = 2 * stats.norm.sf(u)
    assert tail.avar(eps, v) == pytest.approx(num / den / eps, rel=1e-7)


def test_range_bounded_risk_assessment():
    sigma = _complete_sigma(n=5)
    r = range_bounded_risk(sigma, 0, 10.0, 1, DEFAULT)
    assert r.avar >= r.var > 0
    assert r.level == risk_level(r.avar, DEFAULT)


def test_degenerate_correlation():
    with pytest.raises(DegenerateCorrelation):
        RangeBoundedTail(1.0, 1.0, 1 - 1e-13, 1.0)
    with pytest.raises(DegenerateCorrelation):
        range_bounded_risk(np.ones((2, 2)), 0, 1.0, 1, DEFAULT)


# fundamental limits


def test_kappa_and_iota(oracle):
    assert iota(0.1) == pytest.approx(oracle["iota_0.1"], rel=1e-13)
    assert kappa(0.1) == pytest.approx(oracle["kappa_0.1"], rel=1e-12)
    # Mills-ratio identity: kappa_eps = phi(Phi^{-1}(1 - eps)) / eps
    for eps in (0.01, 0.1, 0.3, 0.7):
        assert kappa(eps) == pytest.approx(stats.norm.pdf(stats.norm.isf(eps)) / eps, rel=1e-12)
    # kappa is the AV@R of a standard normal, so kappa_{eps/2} is that of |N(0,1)|
    assert kappa(0.05) == pytest.approx(folded_avar(0.0, 1.0, 0.1), rel=1e-12)


def test_kappa_against_monte_carlo():
    z = np.random.default_rng(0).standard_normal(2_000_000)
    q = np.quantile(z, 0.9)
    tail = z[z > q]
    assert kappa(0.1) == pytest.approx(tail.mean(), abs=4 * tail.std() / math.sqrt(len(tail)))


def test_sigma_min(oracle):
    assert sigma_min(20, 0.05, 0.01) == pytest.approx(oracle["sigma_min_20"], rel=1e-12)


def test_best_achievable_cases(oracle):
    params = RiskParams(c=2.0, alpha=10000.0)
    pos = best_achievable_bound(20, 0.05, 0.01, 4.0, params, +1)
    assert pos.case is CovSign.POSITIVE
    assert pos.frak_a == pytest.approx(oracle["bound_pos_avar"], rel=1e-10)
    assert pos.level_bound.value == pytest.approx(oracle["bound_pos_level_c2_a1e4"], rel=1e-9)
    neg = best_achievable_bound(20, 0.05, 0.01, 4.0, params, -0.3)
    assert neg.level_bound == RiskLevel.zero() and neg.frak_a == 0.0
    zero = best_achievable_bound(20, 0.05, 0.01, 4.0, params, "zero")
    assert zero.level_bound.value == pytest.approx(oracle["bound_zero_level_c2_a1e4"], rel=1e-9)
    for bad in ("sideways", float("nan"), CovSign.COMPLETE):
        with pytest.raises(InvalidSign):
            best_achievable_bound(20, 0.05, 0.01, 4.0, params, bad)


def test_positive_case_uses_the_smaller_term():
    # a tiny failure makes sqrt(f_lo / f_hi) y_f the binding term
    b = best_achievable_bound(20, 0.05, 0.01, 1e-4, DEFAULT, 1)
    assert b.frak_a < b.kappa_eps * b.sigma_min


def test_best_achievable_complete(oracle):
    b = best_achievable_complete(20, 0.05, 0.01, 4.0, DEFAULT)
    assert b.mu_tilde == pytest.approx(-4 / 19)
    assert b.frak_a == pytest.approx(oracle["best_complete20_avar"], rel=1e-10)
    assert b.level_bound.value == pytest.approx(oracle["best_complete20_level"], rel=1e-9)
    with pytest.raises(ValueError):
        best_achievable_complete(2, 0.05, 0.01, 4.0, DEFAULT)


@pytest.mark.parametrize("frac", np.linspace(0.05, 0.95, 10))
def test_complete_bound_never_exceeds_actual_risk(frac):
    n = 20
    tau = frac * math.pi / (2 * n)
    bound = best_achievable_complete(n, tau, 0.01, 4.0, DEFAULT)
    prof = cascading_risk_profile(_complete_sigma(n, tau), FailureObservation((0,), (4.0,)), DEFAULT)
    assert bound.level_bound.value <= prof.levels[1] * (1 + 1e-12)


def test_complete_bound_large_n_limit():
    f_lo = 1.5319192026248734
    b = best_achievable_complete(100000, 0.05, 0.01, 4.0, DEFAULT)
    assert b.sigma_tilde == pytest.approx(math.sqrt(1e-4 * 0.05 * f_lo), rel=1e-4)
    assert abs(b.mu_tilde) < 1e-4


def test_small_sweep_is_deterministic_and_sound():
    params = RiskParams(c=2.0, alpha=10000.0)
    a = bound_validation_sweep(6, 12, (0.3, 0.8), params, 0.05, 0.01, 4.0, seed=9)
    b = bound_validation_sweep(6, 12, (0.3, 0.8), params, 0.05, 0.01, 4.0, seed=9, threads=3)
    assert a.to_dict() == b.to_dict()
    assert a.violations == 0
    assert a.pairs_checked == 6 * 12 * 11 == sum(a.sign_histogram.values())


def test_profile_of_observed_state_matches_direct():
    sigma = _complete_sigma(8)
    obs = FailureObservation((2, 5), (4.0, -1.0))
    from cascade_risk.risk import profile_from_state

    a = profile_from_state(init_state(sigma, obs), DEFAULT).levels
    b = cascading_risk_profile(sigma, obs, DEFAULT).levels
    np.testing.assert_array_equal(a, b)
