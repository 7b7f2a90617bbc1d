"""Stochastic and deterministic convolutions against the heat semigroup.

Paths are coefficient arrays of shape (..., n_times, n_modes). Everything is
computed per mode, where S(t) is multiplication by exp(-alpha_k t).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .noise import (JumpSpec, PoissonStream, WienerIncrements, WienerSpec, _phi1,
                    profile_values, sample_wiener_increments)
from .spectral import SpectralBasis


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConvolutionPath:
    """Convolution values on ``grid``; ``left`` marks left-limit entries of augmented grids."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    basis: SpectralBasis
    left: Optional[np.ndarray] = None

    def sup_lq(self, q: float) -> np.ndarray:
        """max over the grid of ||value||_{L_q}, one entry per leading index."""
        return sup_norm(self.values, self.basis, q)


def sup_norm(values: np.ndarray, basis: SpectralBasis, q: float, chunk: int = 8) -> np.ndarray:
    """Grid-sup L_q norm over the time axis (second to last) of coefficient paths."""
    values = np.asarray(values)
    if q == 2:
        return np.sqrt(np.max(np.einsum("...k,...k->...", values, values), axis=-1))
    if values.ndim == 2:
        return np.max(basis.lp_norm(values, q))
    lead = values.shape[:-2]
    flat = values.reshape((-1,) + values.shape[-2:])
    out = np.concatenate([np.max(basis.lp_norm(flat[i:i + chunk], q), axis=-1)
                          for i in range(0, flat.shape[0], chunk)])
    return out.reshape(lead)


def recurse(decay: np.ndarray, inc: np.ndarray, x0=0.0) -> np.ndarray:
    """x_{j+1} = decay_j * x_j + inc_j, returned with x_0 prepended on the time axis."""
    n = inc.shape[-2]
    out = np.empty(inc.shape[:-2] + (n + 1, inc.shape[-1]))
    x = np.broadcast_to(np.asarray(x0, dtype=float), out[..., 0, :].shape).copy()
    out[..., 0, :] = x
    for j in range(n):
        x = decay[j] * x + inc[..., j, :]
        out[..., j + 1, :] = x
    return out


def wiener_convolution(grid, wiener: WienerSpec, basis: SpectralBasis, seed=None,
                       increments: Optional[WienerIncrements] = None) -> ConvolutionPath:
    """W_A(t) = int_0^t S(t-s) B(s) dW(s) by exact per-mode Ornstein-Uhlenbeck transitions."""
    if wiener.n_modes != basis.n_modes:
        raise UnsupportedConfiguration("B must be diagonal on the basis (one coefficient per mode)")
    grid = np.asarray(grid, dtype=float)
    alpha = basis.eigenvalues
    if increments is None:
        increments = sample_wiener_increments(grid, wiener, seed, rates=[alpha])
    ou = _weighted_for(increments, alpha)
    dt = np.diff(grid)
    b = wiener.b * profile_values(wiener.time_profile, grid[:-1])[:, None]
    vals = recurse(np.exp(-np.outer(dt, alpha)), ou * b)
    return ConvolutionPath(grid, vals, "wiener", basis)


def _weighted_for(increments: WienerIncrements, rate: np.ndarray) -> np.ndarray:
    for r, w in zip(increments.rates, increments.weighted):
        if np.array_equal(r, rate):
            return w
    raise ValueError("increments were not sampled with the requested rate")


def wiener_integral(increments: WienerIncrements, wiener: WienerSpec) -> np.ndarray:
    """int_0^t B(s) dW(s) on the grid, as coefficients."""
    grid = increments.grid
    b = wiener.b * profile_values(wiener.time_profile, grid[:-1])[:, None]
    inc = increments.dW * b
    out = np.zeros(inc.shape[:-2] + (grid.size, inc.shape[-1]))
    np.cumsum(inc, axis=-2, out=out[..., 1:, :])
    return out


def _event_cells(grid: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Index j of the cell (t_j, t_{j+1}] holding each event time."""
    return np.clip(np.searchsorted(grid, times, side="left") - 1, 0, max(grid.size - 2, 0))


def _compensator(grid, jumps: JumpSpec, rates) -> np.ndarray:
    gbar = jumps.mean_field()
    if jumps.time_profile is None:
        return gbar * grid[:, None] * _phi1(np.outer(grid, rates))
    dt = np.diff(grid)
    c = profile_values(jumps.time_profile, grid[:-1])
    inc = c[:, None] * gbar * dt[:, None] * _phi1(np.outer(dt, rates))
    return recurse(np.exp(-np.outer(dt, rates)), inc)


def jump_convolution(grid, jumps: JumpSpec, stream: PoissonStream, basis: SpectralBasis,
                     augment: bool = False, rates=None) -> ConvolutionPath:
    """G_A(t) = sum_{t_i <= t} S(t - t_i) G(t_i, z_i) - int_0^t S(t-s) int G dm ds.

    G(t, z) = c(t_j) G(z) on each cell (t_j, t_{j+1}] when a time profile is set.
    With ``augment`` the path is also evaluated at every jump time, preceded by
    its left limit, so the grid max captures the cadlag supremum at jumps.
    ``rates`` replaces the eigenvalues (used by the linear oracle).
    """
    grid = np.asarray(grid, dtype=float)
    rates = basis.eigenvalues if rates is None else np.asarray(rates, dtype=float)
    comp = _compensator(grid, jumps, rates)
    K = rates.size
    J = np.zeros((grid.size, K))
    if len(stream):
        cell = _event_cells(grid, stream.times)
        g = jumps.fields_at(stream.marks, stream.labels)
        c = profile_values(jumps.time_profile, grid[cell])
        amp = g * c[:, None]
        dt = np.diff(grid)
        inc = np.zeros((grid.size - 1, K))
        np.add.at(inc, cell, amp * np.exp(-np.outer(grid[cell + 1] - stream.times, rates)))
        J = recurse(np.exp(-np.outer(dt, rates)), inc)
    values = J - comp
    if not augment or not len(stream):
        return ConvolutionPath(grid, values, "jump", basis, np.zeros(grid.size, dtype=bool))

    # extra entries (left limit, value) at each event time
    ev_t = np.repeat(stream.times, 2)
    ev_left = np.tile([True, False], len(stream))
    ev_cell = _event_cells(grid, ev_t)
    tau = ev_t - grid[ev_cell]
    extra = np.exp(-np.outer(tau, rates)) * J[ev_cell]
    for n_ev, (ti, ci) in enumerate(zip(stream.times, cell)):
        hit = (ev_cell == ci) & ((ev_t > ti) | ((ev_t == ti) & ~ev_left))
        if hit.any():
            extra[hit] += amp[n_ev] * np.exp(-np.outer(ev_t[hit] - ti, rates))
    if jumps.time_profile is None:
        extra -= jumps.mean_field() * ev_t[:, None] * _phi1(np.outer(ev_t, rates))
    else:
        cv = profile_values(jumps.time_profile, grid[ev_cell])
        extra -= (np.exp(-np.outer(tau, rates)) * comp[ev_cell]
                  + cv[:, None] * jumps.mean_field() * tau[:, None] * _phi1(np.outer(tau, rates)))
    times = np.concatenate([grid, ev_t])
    left = np.concatenate([np.zeros(grid.size, dtype=bool), ev_left])
    # stable sort keeps grid points before events at equal times, left limits first
    order = np.lexsort((~left, times))
    return ConvolutionPath(times[order], np.concatenate([values, extra])[order], "jump", basis, left[order])


def jump_convolution_batch(grid, jumps: JumpSpec, streams: Sequence[PoissonStream],
                           basis: SpectralBasis, rates=None) -> np.ndarray:
    """Grid values of G_A for several streams, shape (n_streams, n_times, n_modes)."""
    return np.stack([jump_convolution(grid, jumps, s, basis, rates=rates).values for s in streams])


def deterministic_convolution(grid, h: np.ndarray, basis: SpectralBasis) -> ConvolutionPath:
    """int_0^t S(t-s) h(s) ds by the exponential left-point rule.

    C(t_{j+1}) = exp(-alpha dt) (C(t_j) + dt h(t_j)); ``h`` is given at the grid
    points (the value at the final point is not used).
    """
    grid = np.asarray(grid, dtype=float)
    h = np.asarray(h, dtype=float)
    dt = np.diff(grid)
    n = dt.size
    decay = np.exp(-np.outer(dt, basis.eigenvalues))
    inc = decay * dt[:, None] * h[..., :n, :]
    return ConvolutionPath(grid, recurse(decay, inc), "deterministic", basis)
