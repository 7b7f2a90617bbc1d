import numpy as np
import pytest

from jumpspde import JumpSpec, Problem, SpectralBasis, WienerSpec
from jumpspde import scalar_monotone as sm


def make_problem(f=None, n_modes=16, T=1.0, sigma=0.5, weights=(2.0, 1.0), amps=(0.5, 0.3), u0=(1.0, 0.5)):
    """Two atoms, one per leading mode, and a two-mode initial condition."""
    basis = SpectralBasis(n_modes)
    fields = np.zeros((len(weights), n_modes))
    for i, a in enumerate(amps):
        fields[i, i] = a
    c0 = np.zeros(n_modes)
    c0[:len(u0)] = u0
    return Problem(f or sm.cubic(), basis, WienerSpec.power_law(sigma, 1.0, n_modes),
                   JumpSpec(np.arange(len(weights)), weights, fields), basis.field(c0), T)


@pytest.fixture
def problem():
    return make_problem()


@pytest.fixture
def basis():
    return SpectralBasis(16)
