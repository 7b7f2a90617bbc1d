"""Yosida-regularised semilinear stochastic heat equations with Wiener and Poisson noise."""
from .scalar_monotone import MonotoneFn, resolvent, yosida_eval
from .spectral import Field, SpectralBasis
from .noise import JumpSpec, WienerSpec
from .solver import Problem, picard_solve, realize_noise, solve_generalized, solve_mild, time_grid

__version__ = "0.1.0"
