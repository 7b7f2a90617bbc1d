"""Dirichlet Laplacian on (0, 1) in its sine eigenbasis.

Mode k has eigenfunction e_k = sqrt(2) sin(k pi x) and eigenvalue (k pi)^2.
Grid values live on ``n_grid`` interior points x_i = i/(n_grid + 1); with the
zero boundary values the composite trapezoid rule reduces to h * sum(values).
For n_grid >= 4*n_modes the rule integrates |x|^p exactly for even p <= 8
on the span, and the grid transform is orthogonal (Parseval holds exactly).

Coefficient arrays may carry any number of leading axes; the last axis is
always the mode index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    n_modes: int
    n_grid: int = 0
    eigenvalues: np.ndarray = field(init=False, repr=False)
    grid: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False, repr=False)
    _phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        n_grid = self.n_grid or 4 * self.n_modes
        if n_grid < self.n_modes:
            raise ValueError("n_grid must be >= n_modes for an invertible grid transform")
        k = np.arange(1, self.n_modes + 1)
        x = np.arange(1, n_grid + 1) / (n_grid + 1)
        phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, x))
        set_ = object.__setattr__
        set_(self, "n_grid", n_grid)
        set_(self, "eigenvalues", (k * np.pi) ** 2)
        set_(self, "grid", x)
        set_(self, "h", 1.0 / (n_grid + 1))
        set_(self, "_phi", phi)
        for arr in (self.eigenvalues, self.grid, self._phi):
            arr.setflags(write=False)

    def synthesize(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self._phi

    def analyze(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) @ self._phi.T) * self.h

    def grid_lp_norm(self, values, p: float) -> np.ndarray:
        """L_p norm of grid values along the last axis."""
        a = np.abs(values)
        if p == 2:
            return np.sqrt(self.h * np.einsum("...i,...i->...", a, a))
        return (self.h * np.sum(a ** p, axis=-1)) ** (1.0 / p)

    def lp_norm(self, coeffs, p: float) -> np.ndarray:
        if p == 2:
            c = np.asarray(coeffs, dtype=float)
            return np.sqrt(np.einsum("...k,...k->...", c, c))
        return self.grid_lp_norm(self.synthesize(coeffs), p)

    def field(self, coeffs) -> "Field":
        return Field(np.asarray(coeffs, dtype=float), self)

    def eigenfunction(self, k: int, amplitude: float = 1.0) -> "Field":
        c = np.zeros(self.n_modes)
        c[k - 1] = amplitude
        return Field(c, self)

    def from_values(self, values) -> "Field":
        return Field(self.analyze(values), self)

    def from_function(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return self.from_values(fn(self.grid))

    def zeros(self) -> "Field":
        return Field(np.zeros(self.n_modes), self)


@dataclass(frozen=True, eq=False)
class Field:
    """Element of L_p(0, 1) held as sine coefficients."""

    coeffs: np.ndarray
    basis: SpectralBasis

    def __post_init__(self):
        if self.coeffs.shape != (self.basis.n_modes,):
            raise ValueError(f"expected {self.basis.n_modes} coefficients, got {self.coeffs.shape}")

    @property
    def values(self) -> np.ndarray:
        return self.basis.synthesize(self.coeffs)

    def _like(self, coeffs) -> "Field":
        return Field(coeffs, self.basis)

    def __add__(self, other: "Field") -> "Field":
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "Field":
        return self._like(self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self._like(-self.coeffs)


def apply_A(x: Field) -> Field:
    return x._like(x.coeffs * x.basis.eigenvalues)


def apply_semigroup(t: float, x: Field) -> Field:
    """S(t)x: mode k decays by exp(-alpha_k t)."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return x._like(x.coeffs * np.exp(-x.basis.eigenvalues * t))


def resolvent_A(eps: float, x: Field) -> Field:
    """(I + eps*A)^{-1} x."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return x._like(x.coeffs / (1 + eps * x.basis.eigenvalues))


def lp_norm(x: Field, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(x.basis.grid_lp_norm(x.values, p))


def duality_pairing(g: Field, x: Field, p: float) -> float:
    """Quadrature value of the integral of g * x|x|^(p-2)."""
    if p < 2:
        raise ValueError("duality pairing needs p >= 2")
    xv = x.values
    return float(g.basis.h * np.sum(g.values * xv * np.abs(xv) ** (p - 2)))
