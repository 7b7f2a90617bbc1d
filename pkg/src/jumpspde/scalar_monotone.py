"""Scalar monotone drifts: resolvents, Yosida approximations, growth checks.

All evaluations are vectorised over numpy arrays; scalar inputs return floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TOL_ROOT = 1e-12
MAX_ITER = 200


class ResolventError(RuntimeError):
    """Root finding for ``y + lam*f(y) = r`` did not converge."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(f"{message} (bracket [{bracket[0]!r}, {bracket[1]!r}])")
        self.bracket = bracket


@dataclass(frozen=True, eq=False)
class MonotoneFn:
    """A continuous non-decreasing f with f(0) = 0 and |f(r)| <= C(1 + |r|^(p/2))."""

    eval: Callable[[np.ndarray], np.ndarray]
    growth_exponent_p: float
    growth_constant: float
    deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.growth_exponent_p >= 2:
            raise ValueError(f"growth exponent p must be >= 2, got {self.growth_exponent_p}")
        if not self.growth_constant > 0:
            raise ValueError(f"growth constant must be > 0, got {self.growth_constant}")

    def __call__(self, r):
        return self.eval(np.asarray(r, dtype=float))

    @property
    def p(self) -> float:
        return self.growth_exponent_p

    @property
    def p_star(self) -> float:
        return self.growth_exponent_p ** 2 / 2

    def check_invariants(self, samples) -> None:
        """Raise ``ValueError`` if f(0) != 0, monotonicity or growth fails on ``samples``."""
        r = np.sort(np.asarray(samples, dtype=float).ravel())
        if self(0.0) != 0:
            raise ValueError(f"{self.name}: f(0) = {self(0.0)!r}, expected 0")
        fr = self(r)
        if np.any(np.diff(fr) < 0):
            raise ValueError(f"{self.name}: not monotone increasing on samples")
        bound = self.growth_constant * (1 + np.abs(r) ** (self.p / 2))
        if np.any(np.abs(fr) > bound * (1 + 1e-12)):
            raise ValueError(f"{self.name}: growth bound |f(r)| <= C(1+|r|^(p/2)) violated")


# catalogue -------------------------------------------------------------------

def linear(c: float = 1.0) -> MonotoneFn:
    """f(r) = c*r, c >= 0."""
    if c < 0:
        raise ValueError("linear drift needs c >= 0 to be monotone")
    return MonotoneFn(
        eval=lambda r: c * r,
        growth_exponent_p=2.0,
        growth_constant=max(c, 1e-300),
        deriv=lambda r: np.full_like(r, c),
        name="linear",
        params={"c": c},
    )


def zero() -> MonotoneFn:
    return linear(0.0)


def power(p: float) -> MonotoneFn:
    """f(r) = r|r|^(p/2 - 1); p=4 gives r|r| and p=6 gives r**3."""
    if p < 2:
        raise ValueError("power drift needs p >= 2")
    e = p / 2 - 1
    if e == 0:
        return MonotoneFn(lambda r: r, 2.0, 1.0, lambda r: np.ones_like(r), "power", {"p": p})
    if e == 2:
        fn, dfn = (lambda r: r * r * r), (lambda r: 3 * r * r)
    else:
        fn = lambda r: r * np.abs(r) ** e
        dfn = lambda r: (e + 1) * np.abs(r) ** e
    return MonotoneFn(fn, float(p), 1.0, dfn, "power", {"p": p})


def cubic() -> MonotoneFn:
    return power(6)


def cubic_plus() -> MonotoneFn:
    """f(r) = r + r**3."""
    return MonotoneFn(
        eval=lambda r: r + r * r * r,
        growth_exponent_p=6.0,
        growth_constant=2.0,
        deriv=lambda r: 1 + 3 * r * r,
        name="cubic_plus",
    )


CATALOG = {
    "zero": lambda **kw: zero(),
    "linear": lambda c=1.0, **kw: linear(float(c)),
    "power": lambda p=4.0, **kw: power(float(p)),
    "cubic": lambda **kw: cubic(),
    "cubic_plus": lambda **kw: cubic_plus(),
}


def from_name(name: str, **params) -> MonotoneFn:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown drift {name!r}; choose from {sorted(CATALOG)}") from None
    return factory(**params)


# resolvent and Yosida approximation -------------------------------------------

def resolvent(f: MonotoneFn, lam: float, r, tol: float = TOL_ROOT, max_iter: int = MAX_ITER):
    """Solve ``y + lam*f(y) = r`` elementwise.

    Safeguarded Newton: the root lies in [min(0, r), max(0, r)] because f(0) = 0,
    and any Newton step leaving the current bracket is replaced by bisection.
    Without ``f.deriv`` the iteration is pure bisection.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam!r}")
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    shape = r.shape
    r = r.ravel()
    y = np.empty_like(r)
    if r.size == 0:
        return y.reshape(shape)
    newton = f.deriv is not None
    d0 = f.deriv(np.zeros(1))[0] if newton else 0.0
    # active set: indices still iterating, with their brackets and iterates
    idx = np.arange(r.size)
    ra = r
    lo = np.minimum(ra, 0.0)
    hi = np.maximum(ra, 0.0)
    ya = ra / (1 + lam * d0) if newton else 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = ya + lam * f.eval(ya) - ra
        done = np.abs(g) <= tol
        collapsed = hi - lo <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        done |= collapsed
        if done.any():
            y[idx[done]] = ya[done]
            keep = ~done
            idx, ra, ya, g, lo, hi = idx[keep], ra[keep], ya[keep], g[keep], lo[keep], hi[keep]
            if idx.size == 0:
                break
        hi = np.where(g > 0, ya, hi)
        lo = np.where(g < 0, ya, lo)
        mid = 0.5 * (lo + hi)
        if newton:
            with np.errstate(divide="ignore", invalid="ignore"):
                step = ya - g / (1 + lam * f.deriv(ya))
            ya = np.where((step > lo) & (step < hi), step, mid)
        else:
            ya = mid
    else:
        g = ya + lam * f.eval(ya) - ra
        bad = np.argmax(np.abs(g))
        raise ResolventError(
            f"resolvent of {f.name} (lambda={lam}) did not converge in {max_iter} iterations",
            (float(lo[bad]), float(hi[bad])),
        )
    y = y.reshape(shape)
    return float(y) if scalar else y


def yosida_eval(f: MonotoneFn, lam: float, r, tol: float = TOL_ROOT, max_iter: int = MAX_ITER):
    """Yosida approximation f_lam(r) = (r - J_lam r)/lam.

    At the root ``(r - y)/lam == f(y)`` exactly, and the right-hand side avoids
    the cancellation in ``r - y`` for small lambda, so that form is evaluated.
    """
    y = resolvent(f, lam, r, tol, max_iter)
    out = f.eval(np.asarray(y, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
