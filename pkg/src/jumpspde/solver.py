"""Regularised mild solutions, the lambda -> 0 limit and generalised solutions.

The regularised equation is solved for v = u - G_A, which removes the jumps:
v is the fixed point of

    phi  ->  S(t) u0 - int_0^t S(t-s) f_lam(phi(s) + G_A(s)) ds + W_A(t),

iterated on consecutive subintervals short enough for the map to contract.
All paths are coefficient arrays of shape (n_samples, n_times, n_modes) and
every sample is advanced together.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .convolution import (deterministic_convolution, jump_convolution_batch, recurse, sup_norm,
                          wiener_integral, _weighted_for)
from .noise import (JumpSpec, PoissonStream, WienerIncrements, WienerSpec, as_seed_sequence,
                    profile_values, sample_poisson_stream, sample_wiener_increments, time_integral)
from .scalar_monotone import MonotoneFn, yosida_eval
from .spectral import Field, SpectralBasis

log = logging.getLogger(__name__)

TOL_PICARD = 1e-10
MAX_PICARD = 200
DEFAULT_LAMBDAS = tuple(0.1 * 2.0 ** -n for n in range(5))


class SolverError(RuntimeError):
    pass


class ContractionError(SolverError):
    """Picard iteration did not contract; carries the observed Lipschitz factor."""

    def __init__(self, message: str, lipschitz: float = float("nan")):
        super().__init__(message)
        self.lipschitz = lipschitz


class CauchyError(SolverError):
    def __init__(self, message: str, table):
        super().__init__(message)
        self.table = table


class RegimeError(SolverError):
    pass


@dataclass(frozen=True)
class Regime:
    """Integrability of the data; the first three are the strong hypotheses."""

    u0_Lp: bool = True
    B_gamma_p: bool = True
    G_Lm_pstar: bool = True
    u0_L2: bool = True
    B_gamma_2: bool = True
    G_Lm_2: bool = True

    @property
    def strong(self) -> bool:
        return self.u0_Lp and self.B_gamma_p and self.G_Lm_pstar

    @property
    def l2(self) -> bool:
        return self.u0_L2 and self.B_gamma_2 and self.G_Lm_2

    def describe(self) -> str:
        flags = ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in self.__dict__.items())
        kind = "strong (mild solution)" if self.strong else ("L2 only (generalized solution)" if self.l2 else "outside both")
        return f"{kind}: {flags}"


@dataclass(frozen=True, eq=False)
class Problem:
    f: MonotoneFn
    basis: SpectralBasis
    wiener: WienerSpec
    jumps: JumpSpec
    u0: Field
    T: float
    regime: Regime = field(default_factory=Regime)

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be >= 0")
        K = self.basis.n_modes
        if self.wiener.n_modes != K or self.jumps.n_modes != K or self.u0.basis.n_modes != K:
            raise ValueError("u0, B and G must all use the basis' number of modes")

    def with_data(self, **changes) -> "Problem":
        return replace(self, **changes)


def time_grid(T: float, dt: float) -> np.ndarray:
    if T == 0:
        return np.zeros(1)
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not a whole number of steps dt={dt}")
    return np.linspace(0.0, T, n + 1)


# noise realisation ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Common random numbers for a batch of samples: Wiener increments and Poisson streams.

    The increments do not depend on B and the streams depend on the mark law
    only, so problems differing in u0, b or the mark fields share them.
    """

    grid: np.ndarray
    increments: WienerIncrements
    streams: tuple
    seed: object

    @property
    def n_samples(self) -> int:
        return len(self.streams)

    def coarsen(self, factor: int) -> "NoiseRealization":
        return replace(self, grid=self.grid[::factor], increments=self.increments.coarsen(factor))


def realize_noise(problem: Problem, grid, n_samples: int, seed, companion_rates: Sequence = (),
                  jumps: Optional[JumpSpec] = None) -> NoiseRealization:
    """Sample ``n_samples`` independent noise paths, one seed sub-stream each."""
    grid = np.asarray(grid, dtype=float)
    jumps = problem.jumps if jumps is None else jumps
    rates = [problem.basis.eigenvalues, *companion_rates]
    dWs, weighted, streams = [], [], []
    for child in as_seed_sequence(seed).spawn(n_samples):
        w_seed, p_seed = child.spawn(2)
        inc = sample_wiener_increments(grid, problem.wiener, w_seed, rates)
        dWs.append(inc.dW)
        weighted.append(inc.weighted)
        T = grid[-1]
        streams.append(sample_poisson_stream(T, jumps, p_seed) if T > 0
                       else PoissonStream(np.zeros(0), np.zeros(0), np.zeros(0, int), 0.0))
    inc = WienerIncrements(grid, np.stack(dWs), tuple(np.asarray(r) for r in rates),
                           tuple(np.stack([w[i] for w in weighted]) for i in range(len(rates))))
    return NoiseRealization(grid, inc, tuple(streams), seed)


def wiener_paths(problem: Problem, noise: NoiseRealization, rate=None) -> np.ndarray:
    rate = problem.basis.eigenvalues if rate is None else rate
    grid = noise.grid
    dt = np.diff(grid)
    ou = _weighted_for(noise.increments, rate)
    b = problem.wiener.b * profile_values(problem.wiener.time_profile, grid[:-1])[:, None]
    return recurse(np.exp(-np.outer(dt, rate)), ou * b)


def jump_paths(problem: Problem, noise: NoiseRealization, rate=None) -> np.ndarray:
    return jump_convolution_batch(noise.grid, problem.jumps, noise.streams, problem.basis, rates=rate)


# regularised solve --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegularizedSolution:
    lam: float
    grid: np.ndarray
    basis: SpectralBasis
    u: np.ndarray
    v: np.ndarray
    wa: np.ndarray
    ga: np.ndarray
    h: np.ndarray
    picard_iterations: int
    max_sweeps: int
    residual: float
    t0: float
    formulation: str


def _subintervals(dt: np.ndarray, t0: float) -> list[tuple[int, int]]:
    if dt.size and dt.max() > t0 * (1 + 1e-12):
        raise ContractionError(
            f"time step {dt.max():g} exceeds the contraction length T0={t0:g}; "
            "use a larger lambda or a finer time grid")
    out, a, acc = [], 0, 0.0
    for j, d in enumerate(dt):
        if acc + d > t0 * (1 + 1e-12):
            out.append((a, j))
            a, acc = j, 0.0
        acc += d
    if dt.size:
        out.append((a, dt.size))
    return out


def _drift(problem: Problem, lam: float, states: np.ndarray) -> np.ndarray:
    """Coefficients of f_lam evaluated pointwise on the grid."""
    vals = problem.basis.synthesize(states)
    return problem.basis.analyze(yosida_eval(problem.f, lam, vals))


def _change(problem: Problem, diff: np.ndarray) -> float:
    p = problem.f.p
    if p == 2:
        return float(np.sqrt(np.max(np.einsum("...k,...k->...", diff, diff))))
    return float(np.max(problem.basis.lp_norm(diff, p)))


def picard_solve(problem: Problem, lam: float, noise: NoiseRealization, *, tol: float = TOL_PICARD,
                 max_iter: int = MAX_PICARD, kappa: float = 0.5, formulation: str = "hidden",
                 initial: str = "free") -> RegularizedSolution:
    """Solve the regularised equation for one lambda on every sample of ``noise``.

    ``formulation="hidden"`` iterates on v = u - G_A (the jump part enters only
    through the shifted drift); ``"direct"`` iterates the integral equation for u
    itself. ``initial`` is the starting guess on each subinterval: ``"free"``
    continues the drift-free evolution, ``"hold"`` freezes the last known value,
    ``"zero"`` starts from 0.

    The drift is Lipschitz with constant 2/lam and S is a contraction, so on a
    subinterval of length T0 the map has Lipschitz constant at most 2*T0/lam;
    T0 = kappa*lam/2 gives a contraction with factor kappa.
    """
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    if formulation not in ("hidden", "direct"):
        raise ValueError(f"unknown formulation {formulation!r}")
    grid = noise.grid
    if abs(grid[-1] - problem.T) > 1e-12 * max(problem.T, 1):
        raise ValueError(f"noise grid ends at {grid[-1]}, problem has T={problem.T}")
    basis = problem.basis
    alpha = basis.eigenvalues
    M, K = noise.n_samples, basis.n_modes
    dt = np.diff(grid)
    decay = np.exp(-np.outer(dt, alpha))

    wa = wiener_paths(problem, noise)
    ga = jump_paths(problem, noise)
    su0 = np.exp(-np.outer(grid, alpha)) * problem.u0.coeffs
    if formulation == "hidden":
        base, shift = su0 + wa, ga
    else:
        base, shift = su0 + wa + ga, np.zeros_like(ga)

    x = np.empty((M, grid.size, K))
    C = np.zeros((M, grid.size, K))
    x[:, 0] = base[:, 0]
    t0 = kappa * lam / 2
    total = worst = 0
    for a, b in _subintervals(dt, t0):
        m = b - a
        if initial == "free":
            prop = np.cumprod(decay[a:b], axis=0)
            phi = base[:, a + 1:b + 1] - prop * C[:, a:a + 1]
        elif initial == "hold":
            phi = np.repeat(x[:, a:a + 1], m, axis=1)
        elif initial == "zero":
            phi = np.zeros((M, m, K))
        else:
            raise ValueError(f"unknown initial guess {initial!r}")
        changes = []
        Cs = np.empty((M, m, K))
        for it in range(1, max_iter + 1):
            left = np.concatenate([x[:, a:a + 1], phi[:, :-1]], axis=1)
            h = _drift(problem, lam, left + shift[:, a:b])
            c = C[:, a]
            for i in range(m):
                c = decay[a + i] * (c + dt[a + i] * h[:, i])
                Cs[:, i] = c
            new = base[:, a + 1:b + 1] - Cs
            changes.append(_change(problem, new - phi))
            phi = new
            if changes[-1] <= tol:
                break
        else:
            lip = changes[-1] / changes[-2] if len(changes) > 1 and changes[-2] > 0 else float("nan")
            raise ContractionError(
                f"Picard iteration on [{grid[a]:g}, {grid[b]:g}] not converged after {max_iter} "
                f"iterations (last change {changes[-1]:.3e}, estimated Lipschitz factor {lip:.3g})", lip)
        x[:, a + 1:b + 1] = phi
        C[:, a + 1:b + 1] = Cs
        total += it
        worst = max(worst, it)

    if formulation == "hidden":
        v, u = x, x + ga
    else:
        u, v = x, x - ga
    h_full = _drift(problem, lam, u)
    resid = base - deterministic_convolution(grid, h_full, basis).values - x
    residual = _change(problem, resid) if grid.size > 1 else 0.0
    return RegularizedSolution(lam, grid, basis, u, v, wa, ga, h_full, total, worst, residual, t0, formulation)


# lambda -> 0 ---------------------------------------------------------------------

def sup_l2_distance(a: np.ndarray, b: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Per-sample grid-sup L2 distance between two batches of paths."""
    return sup_norm(a - b, basis, 2)


@dataclass(frozen=True, eq=False)
class MildResult:
    u: np.ndarray
    lambdas: tuple
    distances: np.ndarray  # (n_samples, n_lambdas - 1), pathwise grid-sup L2
    cauchy: bool
    paths: dict
    iterations: dict

    @property
    def mean_sq_distances(self) -> np.ndarray:
        return np.mean(self.distances ** 2, axis=0)


def _check_schedule(lambdas) -> tuple:
    lambdas = tuple(float(x) for x in lambdas)
    if not lambdas or min(lambdas) <= 0:
        raise ValueError("lambda schedule must be non-empty and positive")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError(f"lambda schedule must be strictly decreasing, got {lambdas}")
    return lambdas


def _non_increasing(values, rtol=1e-9) -> bool:
    return all(b <= a * (1 + rtol) + 1e-300 for a, b in zip(values, values[1:]))


def solve_mild(problem: Problem, lambdas: Sequence[float], noise: NoiseRealization, *,
               strict: bool = True, require_regime: bool = True, **picard_kw) -> MildResult:
    """Regularised solutions along a decreasing lambda schedule on shared noise.

    Returns the smallest-lambda path as the solution surrogate together with
    the pathwise distances between consecutive iterates. With ``strict`` a
    distance table whose sample mean grows along the schedule raises
    ``CauchyError``.
    """
    lambdas = _check_schedule(lambdas)
    if require_regime and not problem.regime.strong:
        raise RegimeError("mild solution needs u0 in L_p, B in L^gamma_p and G in L^m_{p*}: "
                          + problem.regime.describe())
    paths, iters = {}, {}
    for lam in lambdas:
        sol = picard_solve(problem, lam, noise, **picard_kw)
        paths[lam], iters[lam] = sol.u, sol.picard_iterations
        log.info("lambda=%g: %d Picard iterations, residual %.2e", lam, sol.picard_iterations, sol.residual)
    dist = np.stack([sup_l2_distance(paths[a], paths[b], problem.basis)
                     for a, b in zip(lambdas, lambdas[1:])], axis=-1) if len(lambdas) > 1 \
        else np.zeros((noise.n_samples, 0))
    cauchy = _non_increasing(np.mean(dist ** 2, axis=0))
    if strict and not cauchy:
        raise CauchyError(f"distances between consecutive lambda iterates do not decrease: "
                          f"{np.mean(dist ** 2, axis=0)}", dist)
    return MildResult(paths[lambdas[-1]], lambdas, dist, cauchy, paths, iters)


# generalised solutions -------------------------------------------------------------

def approximate_data(problem: Problem, level: float, cutoff: int) -> Problem:
    """Data in the strong regime: u0 and the mark fields clipped to [-level, level]
    on the grid (then projected back onto the modes, so the bound holds up to the
    projection's overshoot), B restricted to the first ``cutoff`` modes."""
    basis = problem.basis
    u0 = basis.from_values(np.clip(problem.u0.values, -level, level))
    b = problem.wiener.b.copy()
    b[cutoff:] = 0.0
    jumps = problem.jumps
    fields = basis.analyze(np.clip(basis.synthesize(jumps.fields), -level, level))
    return problem.with_data(u0=u0, wiener=problem.wiener.with_b(b), jumps=jumps.with_fields(fields),
                             regime=Regime())


def data_distance_sq(p1: Problem, p2: Problem, grid=None) -> float:
    """E||du0||_H^2 + int ||dB||_HS^2 dt + int int ||dG||_H^2 m(dz) dt for deterministic data."""
    du0 = np.sum((p1.u0.coeffs - p2.u0.coeffs) ** 2)
    T = p1.T
    # B(t) = c(t) diag(b): both problems must share the profile for the difference to be diagonal
    dB = time_integral(p1.wiener.time_profile, 2, T, grid) * np.sum((p1.wiener.b - p2.wiener.b) ** 2)
    f1, w1 = p1.jumps.quadrature()
    f2, w2 = p2.jumps.quadrature()
    if not np.array_equal(w1, w2):
        raise ValueError("data distance needs both problems to share the mark measure")
    dG = time_integral(p1.jumps.time_profile, 2, T, grid) * np.sum(w1 * np.sum((f1 - f2) ** 2, axis=1))
    return float(du0 + dB + dG)


@dataclass(frozen=True, eq=False)
class GeneralizedResult:
    u: np.ndarray
    levels: tuple
    cutoffs: tuple
    distances: np.ndarray  # (n_samples, n - 1) grid-sup L2 between consecutive approximants
    data_distances_sq: np.ndarray  # (n - 1,)
    fitted_C: float

    @property
    def mean_sq_distances(self) -> np.ndarray:
        return np.mean(self.distances ** 2, axis=0)


def solve_generalized(problem: Problem, levels: Sequence[float], noise: NoiseRealization, *,
                      cutoffs: Optional[Sequence[int]] = None, lam: float = DEFAULT_LAMBDAS[-1],
                      **picard_kw) -> GeneralizedResult:
    """Limit of solutions driven by strong-regime approximations of L2 data.

    Approximant n clips u0 and the mark fields at ``levels[n]`` and keeps the
    first ``cutoffs[n]`` modes of B. Each approximant is solved at ``lam``; the
    table compares consecutive iterates with the distance of their data, and
    ``fitted_C`` is the smallest C with E sup||du||^2 <= C * data distance^2.
    """
    if not problem.regime.l2:
        raise RegimeError("generalized solution needs u0 in L2, B in L^gamma_2 and G in L^m_2: "
                          + problem.regime.describe())
    levels = tuple(float(x) for x in levels)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("approximation levels must be strictly increasing")
    K = problem.basis.n_modes
    if cutoffs is None:
        cutoffs = tuple(min(K, 4 * 2 ** n) for n in range(len(levels)))
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != len(levels):
        raise ValueError("need one mode cutoff per level")
    approx = [approximate_data(problem, lv, co) for lv, co in zip(levels, cutoffs)]
    paths = [picard_solve(p, lam, noise, **picard_kw).u for p in approx]
    dist = np.stack([sup_l2_distance(a, b, problem.basis) for a, b in zip(paths, paths[1:])], axis=-1) \
        if len(paths) > 1 else np.zeros((noise.n_samples, 0))
    data = np.array([data_distance_sq(a, b, noise.grid) for a, b in zip(approx, approx[1:])])
    msd = np.mean(dist ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(data > 0, msd / data, np.where(msd > 0, np.inf, 0.0))
    fitted = float(ratios.max()) if ratios.size else 0.0
    return GeneralizedResult(paths[-1], levels, cutoffs, dist, data, fitted)


# diagnostics and oracles ------------------------------------------------------------

def _fitted_weights(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two-point weights (a, b) with int_0^dt alpha w ~ a w(0) + b w(dt), exact for
    constants and for exp(-alpha s)."""
    em = -np.expm1(-x)  # 1 - exp(-x)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(x < 1e-4, x / 2 - x ** 2 / 12, (x - em) / em)
    return x - b, b


def strong_residual(solution: RegularizedSolution, problem: Problem, noise: NoiseRealization,
                    eps: float, rhs: str = "smoothed") -> float:
    """Grid-sup L2 defect of the smoothed strong form, worst sample.

    For w = (I + eps A)^{-1} v and g = (I + eps A)^{-1} f_lam(u):

        w(t) - w(0) + int_0^t (A w + g) ds - (I + eps A)^{-1} int_0^t B dW

    with the A-term integrated by the exponentially fitted two-point rule and
    the drift by the left-point rule. ``rhs="literal"`` subtracts the unsmoothed
    u0 + int B dW instead (and compares with w(t) - u0), which stays large when
    eps is large.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    alpha = problem.basis.eigenvalues
    R = 1.0 / (1 + eps * alpha)
    grid = solution.grid
    dt = np.diff(grid)
    w = solution.v * R
    g = solution.h * R
    A_w, B_w = _fitted_weights(np.outer(dt, alpha))
    aw = A_w * w[:, :-1] + B_w * w[:, 1:]
    integral = np.zeros_like(w)
    np.cumsum(aw + dt[:, None] * g[:, :-1], axis=1, out=integral[:, 1:])
    bw = wiener_integral(noise.increments, problem.wiener)
    if rhs == "smoothed":
        defect = w - w[:, :1] + integral - R * bw
    elif rhs == "literal":
        defect = w - problem.u0.coeffs + integral - bw
    else:
        raise ValueError(f"unknown rhs {rhs!r}")
    return float(np.max(sup_norm(defect, problem.basis, 2)))


def oracle_rate(problem: Problem, lam: float) -> np.ndarray:
    """Per-mode decay rate alpha_k + c/(1 + lam c) of the regularised linear equation."""
    c = problem.f.params["c"]
    return problem.basis.eigenvalues + c / (1 + lam * c)


def linear_oracle(problem: Problem, lam: float, noise: NoiseRealization) -> np.ndarray:
    """Exact solution of the regularised equation for f(r) = c r on the noise paths.

    f_lam(r) = c r/(1 + lam c), so mode k is an Ornstein-Uhlenbeck process with
    jumps and rate alpha_k + c/(1 + lam c). ``noise`` must carry weighted
    increments for that rate (``companion_rates`` in ``realize_noise``).
    """
    if problem.f.name != "linear":
        raise ValueError("the linear oracle needs a linear drift")
    rate = oracle_rate(problem, lam)
    grid = noise.grid
    free = np.exp(-np.outer(grid, rate)) * problem.u0.coeffs
    return free + wiener_paths(problem, noise, rate) + jump_paths(problem, noise, rate)
