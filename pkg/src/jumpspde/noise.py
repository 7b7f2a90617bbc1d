"""Wiener and compensated Poisson noise: sampling and noise norms.

B is diagonal on the sine eigenbasis with coefficients ``b``; G(t, z) is a
mark-indexed field, optionally scaled by a piecewise-constant time profile.
Jump activity is finite, so a Poisson stream on [0, T] is a finite list.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .spectral import SpectralBasis

TimeProfile = Optional[Callable[[np.ndarray], np.ndarray]]


class NormEstimate(NamedTuple):
    value: float
    stderr: float


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def profile_values(profile: TimeProfile, times: np.ndarray) -> np.ndarray:
    if profile is None:
        return np.ones_like(times, dtype=float)
    return np.asarray(profile(np.asarray(times, dtype=float)), dtype=float) * np.ones_like(times)


def time_integral(profile: TimeProfile, q: float, T: float, grid=None) -> float:
    """Integral over [0, T] of |profile(t)|^q for a profile constant on grid cells."""
    if profile is None:
        return float(T)
    if grid is None:
        grid = np.linspace(0.0, T, 1001)
    grid = np.asarray(grid, dtype=float)
    return float(np.sum(np.diff(grid) * np.abs(profile_values(profile, grid[:-1])) ** q))


# Wiener ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WienerSpec:
    """Diagonal B: B e_k = b_k e_k, optionally times a scalar profile of t."""

    b: np.ndarray
    time_profile: TimeProfile = None
    decay: Optional[tuple[float, float]] = None  # (sigma, beta) when built by ``power_law``

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.b.ndim != 1:
            raise ValueError("WienerSpec.b must be a vector of per-mode coefficients")

    @property
    def n_modes(self) -> int:
        return self.b.size

    @property
    def time_dependent(self) -> bool:
        return self.time_profile is not None

    @classmethod
    def power_law(cls, sigma: float, beta: float, n_modes: int, cutoff: Optional[int] = None) -> "WienerSpec":
        k = np.arange(1, n_modes + 1, dtype=float)
        b = sigma * k ** (-beta)
        if cutoff is not None:
            b[cutoff:] = 0.0
        return cls(b, decay=(sigma, beta))

    @classmethod
    def zero(cls, n_modes: int) -> "WienerSpec":
        return cls(np.zeros(n_modes))

    def with_b(self, b) -> "WienerSpec":
        return replace(self, b=np.asarray(b, dtype=float), decay=None)


@dataclass(frozen=True, eq=False)
class WienerIncrements:
    """Per-step, per-mode Brownian increments and exponentially weighted integrals.

    ``dW[..., j, k] = W_k(t_{j+1}) - W_k(t_j)`` and, for each rate array r,
    ``weighted[i][..., j, k]`` is the integral over the step of
    exp(-r_k (t_{j+1} - s)) dW_k(s). All are jointly Gaussian and exact.
    """

    grid: np.ndarray
    dW: np.ndarray
    rates: tuple
    weighted: tuple

    def coarsen(self, factor: int) -> "WienerIncrements":
        """Aggregate ``factor`` consecutive steps exactly (same Brownian path)."""
        n = self.dW.shape[-2]
        if n % factor:
            raise ValueError(f"{n} steps do not split into groups of {factor}")
        grid = self.grid[::factor]
        shp = self.dW.shape[:-2] + (n // factor, factor, self.dW.shape[-1])
        dW = self.dW.reshape(shp).sum(axis=-2)
        dt = np.diff(self.grid).reshape(n // factor, factor)
        weighted = []
        for rate, w in zip(self.rates, self.weighted):
            w = w.reshape(shp)
            # time remaining after each fine step until the end of its coarse step
            rem = np.cumsum(dt[:, ::-1], axis=1)[:, ::-1] - dt
            fac = np.exp(-rem[..., None] * rate)
            weighted.append(np.sum(w * fac, axis=-2))
        return WienerIncrements(grid, dW, self.rates, tuple(weighted))


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] != 0.0:
        raise ValueError("time grid must be a 1-d array starting at 0")
    if np.any(np.diff(grid) < 0):
        raise ValueError("time grid must be non-decreasing")
    return grid


def _psd_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor over the trailing (n, n) axes; non-positive pivots clip to 0."""
    n = cov.shape[-1]
    L = np.zeros_like(cov)
    for j in range(n):
        d = cov[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        ljj = np.sqrt(np.maximum(d, 0.0))
        L[..., j, j] = ljj
        safe = np.where(ljj > 0, ljj, 1.0)
        for i in range(j + 1, n):
            off = cov[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            L[..., i, j] = np.where(ljj > 0, off / safe, 0.0)
    return L


def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x))/x with the x -> 0 limit."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-x) / x
    return np.where(x == 0, 1.0, out)


def sample_wiener_increments(grid, spec: WienerSpec, seed, rates: Sequence[np.ndarray] = ()) -> WienerIncrements:
    """Sample ``dW`` for every mode of ``spec`` plus weighted integrals for ``rates``.

    The draws are sequential per component, so adding rates never changes the
    values produced for earlier ones under the same seed.
    """
    grid = _check_grid(grid)
    dt = np.diff(grid)
    K = spec.n_modes
    rates = tuple(np.broadcast_to(np.asarray(r, dtype=float), (K,)) for r in rates)
    all_rates = np.stack([np.zeros(K), *rates])  # (n, K)
    n = all_rates.shape[0]
    s = all_rates[:, None, :] + all_rates[None, :, :]  # (n, n, K)
    cov = dt[:, None, None, None] * _phi1(dt[:, None, None, None] * s[None])  # (N, n, n, K)
    L = _psd_cholesky(np.moveaxis(cov, -1, 1))  # (N, K, n, n)
    rng = np.random.default_rng(as_seed_sequence(seed))
    comps_arr = np.stack([rng.standard_normal((dt.size, K)) for _ in range(n)], axis=-1)
    out = np.einsum("jkil,jkl->ijk", L, comps_arr) if dt.size else np.zeros((n, 0, K))
    return WienerIncrements(grid, out[0], rates, tuple(out[1:]))


# jumps -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class JumpSpec:
    """Finite mark space: atoms z_i with masses m({z_i}) and fields G(z_i).

    ``fields`` holds sine coefficients, one row per atom.
    """

    marks: np.ndarray
    weights: np.ndarray
    fields: np.ndarray
    time_profile: TimeProfile = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "marks", np.atleast_1d(np.asarray(self.marks, dtype=float)))
        set_(self, "weights", np.atleast_1d(np.asarray(self.weights, dtype=float)))
        set_(self, "fields", np.atleast_2d(np.asarray(self.fields, dtype=float)))
        if not (self.marks.size == self.weights.size == self.fields.shape[0]):
            raise ValueError("marks, weights and fields must have one entry per atom")
        if np.any(self.weights < 0):
            raise ValueError("mark weights must be >= 0")
        if not np.isfinite(self.theta):
            raise ValueError("total jump intensity must be finite")

    @property
    def theta(self) -> float:
        return float(np.sum(self.weights))

    @property
    def n_modes(self) -> int:
        return self.fields.shape[1]

    def mean_field(self) -> np.ndarray:
        """Integral of G(z) m(dz), as coefficients."""
        return self.weights @ self.fields

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """(fields, weights) integrating functions of G(z) against m exactly."""
        return self.fields, self.weights

    def sample_marks(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw n marks from m/theta; returns (mark values, atom labels)."""
        if n == 0:
            return np.zeros(0), np.zeros(0, dtype=int)
        labels = rng.choice(self.weights.size, size=n, p=self.weights / self.theta)
        return self.marks[labels], labels

    def fields_at(self, marks: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return self.fields[labels]

    def scaled(self, c: float) -> "JumpSpec":
        return replace(self, fields=self.fields * c)

    def with_intensity(self, theta: float) -> "JumpSpec":
        return replace(self, weights=self.weights * (theta / self.theta))

    def with_fields(self, fields) -> "JumpSpec":
        return replace(self, fields=np.asarray(fields, dtype=float))

    @classmethod
    def none(cls, n_modes: int) -> "JumpSpec":
        return cls([0.0], [0.0], np.zeros((1, n_modes)))


@dataclass(frozen=True, eq=False)
class ContinuousJumpSpec(JumpSpec):
    """Mark law with a density: ``sampler`` draws from m/theta, ``field_fn`` maps z to coefficients.

    ``marks``/``weights`` form a quadrature rule for m (weights summing to theta)
    and are used for every deterministic integral against m.
    """

    sampler: Callable[[np.random.Generator, int], np.ndarray] = None
    field_fn: Callable[[np.ndarray], np.ndarray] = None

    def sample_marks(self, rng, n):
        z = np.asarray(self.sampler(rng, n), dtype=float) if n else np.zeros(0)
        return z, np.full(z.shape, -1)

    def fields_at(self, marks, labels):
        return np.atleast_2d(self.field_fn(marks)) if marks.size else np.zeros((0, self.n_modes))

    def scaled(self, c):
        fn = self.field_fn
        return replace(self, fields=self.fields * c, field_fn=lambda z: c * fn(z))

    def with_fields(self, fields):
        raise NotImplementedError("continuous mark laws are rescaled through field_fn, not fields")


@dataclass(frozen=True, eq=False)
class PoissonStream:
    times: np.ndarray
    marks: np.ndarray
    labels: np.ndarray
    T: float
    seed: object = None

    def __len__(self) -> int:
        return self.times.size


def sample_poisson_stream(T: float, spec: JumpSpec, seed) -> PoissonStream:
    """Events of a Poisson random measure on (0, T] x Z with intensity Leb x m."""
    if not T > 0:
        raise ValueError("T must be > 0")
    rng = np.random.default_rng(as_seed_sequence(seed))
    theta = spec.theta
    n = int(rng.poisson(theta * T)) if theta > 0 else 0
    times = np.sort(T - rng.random(n) * T)  # uniform on (0, T]
    marks, labels = spec.sample_marks(rng, n)
    return PoissonStream(times, marks, labels, float(T), seed)


# norms -------------------------------------------------------------------------

def gamma_norm(spec: WienerSpec, p: float, basis: SpectralBasis, n_draws: int = 2000,
               seed=0, method: str = "auto") -> NormEstimate:
    """||B||_{gamma(H -> L_p)} = sqrt(E ||sum_k g_k b_k e_k||_{L_p}^2), g_k iid N(0, 1).

    For p = 2 this is the Hilbert-Schmidt norm; ``method="mc"`` forces the
    Monte Carlo estimate anyway.
    """
    if not np.any(spec.b):
        return NormEstimate(0.0, 0.0)
    if p == 2 and method != "mc":
        return NormEstimate(float(np.sqrt(np.sum(spec.b ** 2))), 0.0)
    rng = np.random.default_rng(as_seed_sequence(seed))
    g = rng.standard_normal((n_draws, spec.n_modes))
    sq = basis.lp_norm(g * spec.b, p) ** 2
    m = sq.mean()
    se = sq.std(ddof=1) / np.sqrt(n_draws)
    return NormEstimate(float(np.sqrt(m)), float(se / (2 * np.sqrt(m))))


def norm_B_gamma(spec: WienerSpec, q: float, p: float, basis: SpectralBasis, T: float = 1.0,
                 grid=None, n_draws: int = 2000, seed=0, method: str = "auto") -> NormEstimate:
    """||B||_{L^gamma_q}: the q-th root of the time integral of ||B(t)||^q_{gamma(H -> L_p)}."""
    if q < 1:
        raise ValueError("q must be >= 1")
    g = gamma_norm(spec, p, basis, n_draws, seed, method)
    scale = time_integral(spec.time_profile, q, T, grid) ** (1.0 / q)
    return NormEstimate(g.value * scale, g.stderr * scale)


def norm_G_Lmq(spec: JumpSpec, q: float, basis: SpectralBasis, T: float = 1.0, grid=None) -> float:
    """||g||_{L^m_q}: q-th root of  int int ||g||_q^q dm dt + int (int ||g||_q^2 dm)^(q/2) dt."""
    if q < 2:
        raise ValueError("q must be >= 2")
    fields, w = spec.quadrature()
    norms = basis.lp_norm(fields, q)
    total = np.sum(w * norms ** q) + np.sum(w * norms ** 2) ** (q / 2)
    return float((time_integral(spec.time_profile, q, T, grid) * total) ** (1.0 / q))
