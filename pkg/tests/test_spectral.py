import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from jumpspde.spectral import (SpectralBasis, apply_A, apply_semigroup, duality_pairing, lp_norm,
                               resolvent_A)

B = SpectralBasis(8)
coeffs = arrays(np.float64, 8, elements=st.floats(-10, 10, allow_nan=False))


def test_eigenpairs():
    np.testing.assert_allclose(B.eigenvalues, (np.arange(1, 9) * np.pi) ** 2)
    assert B.n_grid == 32
    x = B.grid
    np.testing.assert_allclose(B.eigenfunction(3).values, np.sqrt(2) * np.sin(3 * np.pi * x), atol=1e-14)


def test_transform_is_orthogonal():
    gram = B._phi @ B._phi.T * B.h
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(c=coeffs)
def test_round_trip_and_parseval(c):
    x = B.field(c)
    np.testing.assert_allclose(B.analyze(x.values), c, atol=1e-12)
    assert lp_norm(x, 2) == pytest.approx(np.linalg.norm(c), rel=1e-12, abs=1e-12)
    assert B.lp_norm(c, 2) == pytest.approx(B.grid_lp_norm(x.values, 2), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(c=coeffs, t=st.floats(0, 1), s=st.floats(0, 1))
def test_semigroup_properties(c, t, s):
    x = B.field(c)
    np.testing.assert_allclose(apply_semigroup(t, apply_semigroup(s, x)).coeffs,
                               apply_semigroup(t + s, x).coeffs, rtol=1e-12, atol=1e-300)
    # contraction in L2
    assert lp_norm(apply_semigroup(t, x), 2) <= lp_norm(x, 2) * (1 + 1e-12) + 1e-300


@settings(max_examples=100, deadline=None)
@given(c=coeffs, eps=st.floats(1e-4, 10))
def test_resolvent_of_A(c, eps):
    x = B.field(c)
    y = resolvent_A(eps, x)
    np.testing.assert_allclose((y + eps * apply_A(y)).coeffs, c, rtol=1e-10, atol=1e-10)


def test_semigroup_rejects_negative_time():
    with pytest.raises(ValueError):
        apply_semigroup(-1.0, B.zeros())


def test_field_arithmetic_and_validation():
    a, b = B.eigenfunction(1), B.eigenfunction(2, 3.0)
    np.testing.assert_array_equal((a + b - b).coeffs, a.coeffs)
    np.testing.assert_array_equal((2 * a).coeffs, (a * 2).coeffs)
    np.testing.assert_array_equal((-a).coeffs, -a.coeffs)
    with pytest.raises(ValueError):
        B.field(np.zeros(3))
    with pytest.raises(ValueError):
        SpectralBasis(8, 4)
    with pytest.raises(ValueError):
        SpectralBasis(0)


def test_duality_pairing():
    x = B.eigenfunction(1)
    # <x, x|x|^{p-2}> = ||x||_p^p
    assert duality_pairing(x, x, 4) == pytest.approx(lp_norm(x, 4) ** 4, rel=1e-12)
    assert duality_pairing(x, x, 2) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        duality_pairing(x, x, 1.5)


def test_lp_norm_of_constant_like_field():
    # sqrt(2) sin(pi x): ||.||_4^4 = 4 * 3/8 = 3/2 exactly for the trapezoid rule
    assert lp_norm(B.eigenfunction(1), 4) ** 4 == pytest.approx(1.5, rel=1e-12)


def test_semigroup_and_resolvent_closed_forms():
    e1 = B.eigenfunction(1)
    x = B.field(np.random.default_rng(0).standard_normal(8))
    np.testing.assert_array_equal(apply_semigroup(0.0, x).coeffs, x.coeffs)
    np.testing.assert_allclose(apply_semigroup(0.1, e1).coeffs, np.exp(-np.pi ** 2 / 10) * e1.coeffs, rtol=1e-14)
    np.testing.assert_allclose(resolvent_A(1.0, e1).coeffs, e1.coeffs / (1 + np.pi ** 2), rtol=1e-14)
    gaps = [lp_norm(resolvent_A(eps, x) - x, 2) for eps in (1, 0.1, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]
    for eps in (1, 0.1, 0.01):
        assert lp_norm(apply_A(resolvent_A(eps, x)), 2) <= lp_norm(x, 2) / eps * (1 + 1e-12)


def test_norm_and_pairing_trivia():
    assert lp_norm(B.zeros(), 3) == 0.0
    assert lp_norm(B.eigenfunction(1), 2) == pytest.approx(1.0)
    assert lp_norm(B.eigenfunction(1), 4) == pytest.approx(1.5 ** 0.25, rel=1e-12)
    x = B.field(np.arange(1.0, 9.0))
    assert duality_pairing(x, x, 2) == pytest.approx(lp_norm(x, 2) ** 2, rel=1e-12)
    assert duality_pairing(x, B.zeros(), 4) == 0.0


@settings(max_examples=100, deadline=None)
@given(c=coeffs, p=st.sampled_from([2, 3, 4, 6, 8]))
def test_laplacian_is_accretive_on_Lp(c, p):
    x = B.field(c)
    scale = 1 + lp_norm(apply_A(x), p) * lp_norm(x, p) ** (p - 1)
    assert duality_pairing(apply_A(x), x, p) >= -1e-8 * scale
