import numpy as np
import pytest

from jumpspde.convolution import (deterministic_convolution, jump_convolution, recurse, sup_norm,
                                  wiener_convolution)
from jumpspde.noise import (JumpSpec, PoissonStream, WienerSpec, sample_poisson_stream,
                            sample_wiener_increments)
from jumpspde.spectral import SpectralBasis

B = SpectralBasis(4)
GRID = np.linspace(0, 1, 1001)


def stream(times, labels):
    times = np.asarray(times, dtype=float)
    return PoissonStream(times, np.asarray(labels, float), np.asarray(labels), 1.0)


def test_jump_convolution_closed_form():
    # one atom, mode 1: G_A(t) = g e^{-a(t - t1)} 1{t >= t1} - theta g (1 - e^{-a t})/a
    g, theta, t1 = 0.7, 3.0, 0.4237
    spec = JumpSpec([0], [theta], g * np.eye(1, 4))
    path = jump_convolution(GRID, spec, stream([t1], [0]), B)
    a = B.eigenvalues[0]
    exact = g * np.exp(-a * (GRID - t1)) * (GRID >= t1) - theta * g * (1 - np.exp(-a * GRID)) / a
    np.testing.assert_allclose(path.values[:, 0], exact, atol=1e-13)
    np.testing.assert_array_equal(path.values[:, 1:], 0.0)


def test_augmented_grid_captures_jump_peak():
    spec = JumpSpec([0], [1.0], np.eye(1, 4) * 2.0)
    st = stream([0.31234], [0])
    plain = jump_convolution(GRID, spec, st, B)
    aug = jump_convolution(GRID, spec, st, B, augment=True)
    assert aug.grid.size == GRID.size + 2 and np.all(np.diff(aug.grid) >= 0)
    i = np.flatnonzero(aug.grid == 0.31234)
    assert aug.left[i[0]] and not aug.left[i[1]]
    # the jump adds exactly g between left limit and value
    np.testing.assert_allclose(aug.values[i[1]] - aug.values[i[0]], [2.0, 0, 0, 0], atol=1e-13)
    assert aug.sup_lq(2) >= plain.sup_lq(2)
    # grid entries are untouched by augmentation
    np.testing.assert_allclose(aug.values[~aug.left & np.isin(aug.grid, GRID)][:GRID.size], plain.values,
                               atol=1e-13)


def test_compensated_jumps_have_zero_mean():
    spec = JumpSpec([0, 1], [2.0, 1.0], np.array([[0.5, 0, 0, 0], [0, 0.3, 0, 0]]))
    grid = GRID[::10]
    end = np.array([jump_convolution(grid, spec, sample_poisson_stream(1.0, spec, s), B).values[-1]
                    for s in range(4000)])
    se = end.std(axis=0, ddof=1) / np.sqrt(len(end))
    assert np.all(np.abs(end.mean(axis=0)) <= 4 * se + 1e-15)


def test_time_profile_matches_constant():
    spec = JumpSpec([0], [2.0], np.eye(1, 4))
    st = stream([0.25, 0.8], [0, 0])
    a = jump_convolution(GRID, spec, st, B).values
    prof = JumpSpec([0], [2.0], np.eye(1, 4), time_profile=lambda t: np.ones_like(t))
    np.testing.assert_allclose(jump_convolution(GRID, prof, st, B).values, a, atol=1e-12)
    twice = JumpSpec([0], [2.0], np.eye(1, 4), time_profile=lambda t: 2 * np.ones_like(t))
    np.testing.assert_allclose(jump_convolution(GRID, twice, st, B).values, 2 * a, atol=1e-12)


def test_wiener_convolution_variance():
    w = WienerSpec(np.array([1.0, 1.0, 0.0, 0.0]))
    ends = np.array([wiener_convolution(GRID[::20], w, B, seed=s).values[-1] for s in range(4000)])
    a = B.eigenvalues[:2]
    var = (1 - np.exp(-2 * a)) / (2 * a)
    assert np.var(ends[:, :2], axis=0) / var == pytest.approx([1, 1], abs=0.1)
    np.testing.assert_array_equal(ends[:, 2:], 0.0)


def test_deterministic_convolution_of_constant():
    # int_0^t e^{-a(t-s)} ds = (1 - e^{-a t})/a; the left-point rule is first order
    h = np.ones((GRID.size, 4))
    c = deterministic_convolution(GRID, h, B).values
    exact = (1 - np.exp(-np.outer(GRID, B.eigenvalues))) / B.eigenvalues
    err = np.max(np.abs(c - exact))
    c2 = deterministic_convolution(np.linspace(0, 1, 2001), np.ones((2001, 4)), B).values[::2]
    assert err < 1e-3
    assert err / np.max(np.abs(c2 - exact)) == pytest.approx(2.0, rel=0.05)


def test_recurse_and_sup_norm():
    out = recurse(np.full((3, 1), 0.5), np.ones((3, 1)), x0=2.0)
    np.testing.assert_allclose(out[:, 0], [2.0, 2.0, 2.0, 2.0])
    paths = np.zeros((5, 7, 4))
    paths[2, 3, 0] = 3.0
    np.testing.assert_allclose(sup_norm(paths, B, 2), [0, 0, 3, 0, 0])
    assert sup_norm(paths, B, 4)[2] == pytest.approx(B.lp_norm(np.array([3.0, 0, 0, 0]), 4))


def test_ou_variance_over_1e5_replicas_and_stationary_limit():
    # replicas of mode 1 sharing its rate; the recursion is the one wiener_convolution runs
    n, a = 100_000, B.eigenvalues[0]
    for t_end in (0.1, 5 / a):
        grid = np.linspace(0, t_end, 11)
        inc = sample_wiener_increments(grid, WienerSpec(np.ones(n)), 4, rates=[np.full(n, a)])
        x = recurse(np.exp(-np.outer(np.diff(grid), np.full(n, a))), inc.weighted[0])[-1]
        exact = (1 - np.exp(-2 * a * t_end)) / (2 * a)
        se = np.sqrt(2 / n) * exact
        assert np.var(x) == pytest.approx(exact, abs=3 * se)
    assert exact == pytest.approx(1 / (2 * a), rel=1e-4)


def test_zero_inputs_give_zero_paths():
    assert np.all(wiener_convolution(GRID, WienerSpec.zero(4), B, seed=0).values == 0)
    empty = stream([], [])
    assert np.all(jump_convolution(GRID, JumpSpec.none(4), empty, B).values == 0)
    assert np.all(deterministic_convolution(GRID, np.zeros((GRID.size, 4)), B).values == 0)


def test_empty_stream_is_pure_compensator():
    g = np.array([[0.3, -0.2, 0, 0]])
    path = jump_convolution(GRID, JumpSpec([0], [2.0], g), stream([], []), B).values
    exact = -2.0 * g * (1 - np.exp(-np.outer(GRID, B.eigenvalues))) / B.eigenvalues
    np.testing.assert_allclose(path, exact, atol=1e-14)


def test_one_jump_two_modes_by_hand():
    g = np.array([[0.4, 0.9, 0, 0]])
    t1 = 0.3
    path = jump_convolution(GRID, JumpSpec([0], [1.0], g), stream([t1], [0]), B)
    i = 700  # t = 0.7
    t = GRID[i]
    for k in range(2):
        a = B.eigenvalues[k]
        hand = np.exp(-a * (t - t1)) * g[0, k] - g[0, k] * (1 - np.exp(-a * t)) / a
        assert path.values[i, k] == pytest.approx(hand, abs=1e-14)


def test_deterministic_convolution_exact_on_decaying_input():
    # h(s) = e^{-a s} on mode 1 gives t e^{-a t}; the exponential left-point rule
    # reproduces it exactly, C_j = t_j e^{-a t_j}, so any order-one claim holds trivially
    a = B.eigenvalues[0]
    for n in (500, 1000, 2000):
        grid = np.linspace(0, 1, n + 1)
        h = np.zeros((n + 1, 4))
        h[:, 0] = np.exp(-a * grid)
        c = deterministic_convolution(grid, h, B).values[:, 0]
        np.testing.assert_allclose(c, grid * np.exp(-a * grid), atol=1e-15)
