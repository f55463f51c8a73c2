import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chtx.model import Field, Grid
from chtx.weights import (IntegrityError, WeightSpec, kappa2_for, make_psi, psi_gradient,
                          psi_laplacian, psi_values, weighted_lp)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_value_at_center(n):
    spec = WeightSpec(0.7, n, center=tuple(range(n)))
    pts = [np.array([float(i)]) for i in range(n)]
    assert psi_values(spec, pts)[0] == pytest.approx(2.0**-n, rel=1e-15)


@pytest.mark.parametrize("k1,n,expected", [
    (2.0, 1, 1.0),
    (0.5, 2, math.sqrt(0.125)),  # both branches coincide
    (0.1, 3, 0.1 / math.sqrt(3)),
    (8.0, 2, math.sqrt(2.0)),
])
def test_kappa2(k1, n, expected):
    assert kappa2_for(k1, n) == pytest.approx(expected)


def test_kappa2_rejects_nonpositive():
    with pytest.raises(ValueError):
        kappa2_for(0.0, 1)


def _fd_oracle(spec, pts, h=1e-4):
    # central differences of psi_values, independent of the closed forms
    grads, lap = [], 0.0
    for i in range(spec.n):
        up = [p + (h if j == i else 0.0) for j, p in enumerate(pts)]
        dn = [p - (h if j == i else 0.0) for j, p in enumerate(pts)]
        fp, fm, f0 = psi_values(spec, up), psi_values(spec, dn), psi_values(spec, pts)
        grads.append((fp - fm) / (2 * h))
        lap = lap + (fp - 2 * f0 + fm) / (h * h)
    return grads, lap


@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_forms_match_finite_differences(n):
    rng = np.random.default_rng(n)
    spec = WeightSpec(0.5, n)
    pts = list(rng.uniform(-5, 5, size=(n, 200)))
    grads, lap = _fd_oracle(spec, pts)
    for g, gf in zip(psi_gradient(spec, pts), grads):
        np.testing.assert_allclose(g, gf, rtol=1e-6, atol=1e-10)
    np.testing.assert_allclose(psi_laplacian(spec, pts), lap, rtol=1e-4, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 3), k1=st.floats(0.01, 5.0), seed=st.integers(0, 2**32 - 1))
def test_weight_bounds_hold(n, k1, seed):
    rng = np.random.default_rng(seed)
    spec = WeightSpec(k1, n)
    k2 = spec.kappa2
    pts = list(rng.uniform(-40, 40, size=(n, 64)))
    psi = psi_values(spec, pts)
    gnorm = np.sqrt(sum(g * g for g in psi_gradient(spec, pts)))
    lap = np.abs(psi_laplacian(spec, pts))
    r = np.sqrt(sum(p * p for p in pts))
    tol = 1 + 1e-12
    assert np.all(psi > 0)
    assert np.all(psi <= np.exp(-k2 * r) * tol)
    assert np.all(gnorm <= k2 * math.sqrt(n) * psi * tol)
    assert np.all(k2 * math.sqrt(n) <= k1 * tol)
    assert np.all(lap <= 2 * k2 * k2 * n * psi * tol)
    assert 2 * k2 * k2 * n <= k1 * tol


def test_weighted_lp_of_one_matches_sech_integral():
    k1 = 0.5
    spec = WeightSpec(k1, 1)
    L = 40.0 / spec.kappa2
    g = Grid(1, L, 4096)
    psi = make_psi(spec, g)
    got = weighted_lp(Field.constant(g, 1.0), psi, 2.0)
    assert got == pytest.approx(math.pi / (2 * spec.kappa2), rel=1e-10)


def test_weighted_lp_homogeneity_and_zero():
    g = Grid(2, 8.0, 32)
    psi = make_psi(WeightSpec(0.5, 2), g)
    u = Field(g, np.random.default_rng(1).random(g.shape))
    p = 2.5
    assert weighted_lp(Field(g, 2 * u.values), psi, p) == pytest.approx(2**p * weighted_lp(u, psi, p), rel=1e-13)
    assert weighted_lp(Field.zeros(g), psi, p) == 0.0


def test_weighted_lp_rejects_negative_density():
    g = Grid(1, 4.0, 16)
    psi = make_psi(WeightSpec(0.5, 1), g)
    u = np.zeros(16)
    u[3] = -1e-6
    with pytest.raises(IntegrityError):
        weighted_lp(Field(g, u), psi, 2.0)


def test_make_psi_dimension_check():
    with pytest.raises(ValueError):
        make_psi(WeightSpec(0.5, 2), Grid(1, 4.0, 16))
