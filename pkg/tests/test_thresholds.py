import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chtx import thresholds as th
from chtx.model import ModelSpec, Variant


def _cons(chi=1.0, tau=1.0, b=1.0):
    return ModelSpec(Variant.CONSUMPTION, chi=chi, a=1.0, b=b, tau=tau)


# ---------------------------------------------------------------- D*


@pytest.mark.parametrize("n,expected", [(2, 1.0), (8, 0.5), (3, math.sqrt(2 / 3)), (12, math.sqrt(1 / 6))])
@pytest.mark.parametrize("chi", [-3.0, 0.2, 5.0])
def test_dstar_tau_one(n, expected, chi):
    assert th.dstar(1.0, n, chi) == pytest.approx(expected, abs=1e-12)


def test_dstar_hand_evaluated_case():
    # n*=1, τ*=-1/2, j=-1, α=3/4 > 1/2 -> (2/2)(3/2 - 1/2)^{-1}
    assert th.dstar(2.0, 2, 1.0) == pytest.approx(1.0, abs=1e-12)


def _dstar_oracle(tau, n, chi):
    # independent transcription with mpmath
    ns = mpmath.mpf(max(1, n / 2))
    ts = 1 / mpmath.mpf(tau) - 1
    j = mpmath.sign(chi * ts)
    alpha = mpmath.sqrt(ts**2 / 4 + 1 / (tau * ns))
    if alpha > -j * abs(ts):
        return float(2 / (tau * ns) / (2 * alpha + j * abs(ts)))
    return float(2 / (tau * ns) / alpha)


@settings(max_examples=200, deadline=None)
@given(tau=st.floats(0.01, 100.0), n=st.integers(1, 12), chi=st.floats(-10, 10).filter(lambda c: abs(c) > 1e-6))
def test_dstar_positive_and_matches_oracle(tau, n, chi):
    d = th.dstar(tau, n, chi)
    assert d > 0
    assert d == pytest.approx(_dstar_oracle(tau, n, chi), rel=1e-12)


@pytest.mark.parametrize("tau,n", [(0.0, 2), (-1.0, 2), (1.0, 0)])
def test_dstar_domain_errors(tau, n):
    with pytest.raises(ValueError):
        th.dstar(tau, n, 1.0)


@settings(max_examples=100, deadline=None)
@given(tau=st.floats(0.05, 20.0), n=st.integers(1, 6), chi=st.sampled_from([-2.0, 1.0]),
       dp=st.floats(0.01, 3.0))
def test_dstar_at_exponent_below_dstar(tau, n, chi, dp):
    p = max(1.0, n / 2) + dp
    assert th.dstar_at_exponent(tau, p, chi) < th.dstar(tau, n, chi)


# ---------------------------------------------------------------- C_{γ,n}


@pytest.mark.parametrize("gamma,n,C,expected", [
    (3.0, 1, 1.0, 512.0),
    (4.0, 2, 1.0, 2.0**33),
    (3.0, 1, 2.0, 4096.0),
])
def test_cgamma_substitution(gamma, n, C, expected):
    assert th.cgamma_bound(gamma, n, C) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(gamma=st.floats(2.001, 60.0), n=st.integers(1, 5), C=st.floats(0.05, 5.0))
def test_cgamma_matches_mpmath(gamma, n, C):
    g, c = mpmath.mpf(gamma), mpmath.mpf(C)
    oracle = mpmath.log(c**g * (g - 2) ** (1 - g) * mpmath.power(2, 9 * n * (g - 2)))
    assert th.log_cgamma_bound(gamma, n, C) == pytest.approx(float(oracle), rel=1e-12, abs=1e-12)


def test_cgamma_overflow_is_inf():
    assert th.cgamma_bound(60.0, 3, 1.0) == math.inf
    assert math.isfinite(th.log_cgamma_bound(60.0, 3, 1.0))


@pytest.mark.parametrize("gamma,C", [(2.0, 1.0), (1.5, 1.0), (3.0, 0.0)])
def test_cgamma_domain(gamma, C):
    with pytest.raises(ValueError):
        th.cgamma_bound(gamma, 1, C)


# ---------------------------------------------------------------- C*_n


@pytest.mark.parametrize("n", [1, 2, 3, 5])
@pytest.mark.parametrize("C", [0.25, 1.0, 7.0])
def test_cstar_halves_when_constant_doubles(n, C):
    assert th.cstar_lower(n, 2 * C) == pytest.approx(th.cstar_lower(n, C) / 2, rel=1e-13)


def test_cstar_single_point():
    assert th.cstar_lower(1, 1.0, [2.0]) == pytest.approx(0.25, rel=1e-14)


def _cstar_dense(n, lo, hi, points=10_000):
    g = np.linspace(lo, hi, points)
    vals = g / (g - 1) * np.exp(-np.array([th.log_cgamma_bound(x + 1, n) for x in g]) / (g + 1))
    return vals.max()


def test_cstar_grid_matches_dense_search():
    grid = np.arange(1.5, 32.01, 0.5)
    got = th.cstar_lower(2, 1.0, grid)
    dense = _cstar_dense(2, 1.5, 32.0)
    assert got == pytest.approx(dense, rel=5e-4)


def test_cstar_supremand_unbounded_near_one():
    # for n <= 2 the supremum over (1, 64] is not attained: refining towards 1 keeps increasing
    vals = [th.cstar_lower(2, 1.0, [1 + 10.0**-k]) for k in (2, 4, 6)]
    assert vals[0] < vals[1] < vals[2]


@pytest.mark.parametrize("grid", [[], [1.0], [0.5, 2.0]])
def test_cstar_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        th.cstar_lower(2, 1.0, grid)


def test_default_grid_inside_domain():
    for n in (1, 2, 3, 6):
        g = th.default_gamma_grid(n)
        assert g.min() > max(1, n / 2) and g.max() == pytest.approx(64.0)


# ---------------------------------------------------------------- σ


def test_sigma_tau_one_closed_form():
    sc = th.sigma(_cons(chi=1.0), 2.0, 0.3)
    assert sc.sigma == pytest.approx(0.5, rel=1e-14)
    assert sc.branch == 1 and sc.holds


def test_sigma_scales_with_chi_squared():
    s1 = th.sigma(_cons(chi=0.7), 2.5, 0.1).sigma
    s2 = th.sigma(_cons(chi=1.4), 2.5, 0.05).sigma
    assert s2 == pytest.approx(4 * s1, rel=1e-13)


def test_sigma_second_branch_coefficients():
    sc = th.sigma_coefficients(0.1, -1.0, 2.0, 0.01)
    assert (sc.A, sc.B, sc.C, sc.D) == pytest.approx((101.0, 0.25, 10.0, 9.0))
    assert sc.D >= math.sqrt(sc.A * sc.B)
    assert sc.branch == 2
    assert sc.sigma == pytest.approx(0.025 + sc.eps2, rel=1e-14)
    assert sc.holds


@settings(max_examples=150, deadline=None)
@given(tau=st.floats(0.05, 20.0), chi=st.floats(0.1, 5.0), sign=st.sampled_from([-1.0, 1.0]),
       p=st.floats(1.05, 4.0), frac=st.floats(0.0, 0.99))
def test_sigma_quadratic_inequality_holds(tau, chi, sign, p, frac):
    chi = sign * chi
    V = frac * th.dstar_at_exponent(tau, p, chi) / abs(chi)
    sc = th.sigma_coefficients(tau, chi, p, V)
    assert sc.holds
    assert np.all(sc.margin(np.linspace(0, V, 200)) > 0)


def test_sigma_consumption_only():
    m = ModelSpec(Variant.PARABOLIC, chi=1, a=1, b=1, lam=1, mu=1, tau=1)
    with pytest.raises(ValueError):
        th.sigma(m, 2.0, 0.1)
    with pytest.raises(ValueError):
        th.sigma(_cons(), 0.9, 0.1)


# ---------------------------------------------------------------- verdicts


def test_consumption_verdict_via_dstar():
    rep = th.check_conditions(_cons(chi=1.0), 2, sup_v0=0.99)
    assert rep.dstar == pytest.approx(1.0)
    assert rep.thm12_ok is True and rep.binding["thm12"] == "Dstar"
    assert rep.thm13_ok is None and rep.thm14_ok is None and rep.rmk15_ok is None


def test_consumption_verdict_fails_far_above():
    rep = th.check_conditions(_cons(chi=1.0, b=1e-6), 2, sup_v0=1000.0)
    assert rep.thm12_ok is False


@pytest.mark.parametrize("chi", [0.1, 5.0, 100.0])
def test_elliptic_two_dimensions_any_chi(chi):
    m = ModelSpec(Variant.ELLIPTIC, chi=chi, a=1, b=1, lam=1, mu=1)
    assert th.check_conditions(m, 2).thm14_ok is True


@pytest.mark.parametrize("chi_mu,ok", [(1.9, True), (2.1, False)])
def test_elliptic_four_dimensions(chi_mu, ok):
    m = ModelSpec(Variant.ELLIPTIC, chi=chi_mu, a=1, b=1, lam=1, mu=1)
    assert th.check_conditions(m, 4).thm14_ok is ok


@pytest.mark.parametrize("chi,tau,expected", [(0.9, 1.0, True), (2.1, 1.0, False), (0.9, 2.0, None)])
def test_parabolic_production_four_b_over_n(chi, tau, expected):
    m = ModelSpec(Variant.PARABOLIC, chi=chi, a=1, b=1, lam=1, mu=1, tau=tau)
    assert th.check_conditions(m, 2).rmk15_ok is expected


def test_report_dict_is_json_ready():
    import json
    rep = th.check_conditions(_cons(), 3, 0.2)
    assert json.loads(json.dumps(rep.to_dict()))["variant"] == "consumption"


@pytest.mark.parametrize("chi,mu,b,n", [(1.0, 1.0, 0.5, 2), (3.0, 1.0, 1.0, 3), (1.0, 1.0, 2.0, 1)])
def test_elliptic_exponent_condition(chi, mu, b, n):
    p = th.elliptic_exponent(chi, mu, b, n)
    if p is not None:
        assert p > max(1, n / 2)
        assert b > mu * chi * (p - 1) / p


@settings(max_examples=200, deadline=None)
@given(tau=st.floats(0.05, 20.0), chi=st.floats(-5.0, 5.0), p=st.floats(1.05, 4.0),
       sig=st.floats(0.0, 10.0), v=st.floats(0.0, 3.0))
def test_bracket_is_quadratic_form_with_positive_d(tau, chi, p, sig, v):
    sc = th.sigma_coefficients(tau, chi if chi != 0 else 1.0, p, 0.0, d_sign=+1)
    c = chi if chi != 0 else 1.0
    quad = sc.A * sig**2 * v**2 + sc.B - sc.C * sig - sc.D * sig * v
    br = float(th.dissipation_bracket(v, sig, c, tau, p))
    assert br == pytest.approx(quad, rel=1e-9, abs=1e-9 * (1 + abs(sc.A * sig**2 * v**2) + sc.B + sc.C * sig))


def test_reference_sign_only_differs_off_tau_one():
    a = th.sigma_coefficients(1.0, 2.0, 2.0, 0.1)
    b = th.sigma_coefficients(1.0, 2.0, 2.0, 0.1, d_sign=+1)
    assert a.sigma == b.sigma
    c = th.sigma_coefficients(0.5, 2.0, 2.0, 0.1, d_sign=+1)
    assert c.D == -th.sigma_coefficients(0.5, 2.0, 2.0, 0.1).D
