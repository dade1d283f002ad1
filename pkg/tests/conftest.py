"""Shared fixtures for the toolkit tests."""

import numpy as np
import pytest

from app.core.spectral import Domain, Parity, SpectralScalar, hermitian_part
from app.services.simulation import gen_initial


@pytest.fixture
def domain():
    """Moderate grid on the default period."""
    return Domain.create(16, 16, 5)


@pytest.fixture
def tiny_domain():
    """Smallest admissible grid on a 2 pi box; horizontal symbols are O(1)."""
    return Domain.create(8, 8, 2, L=2.0 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def state(domain):
    """Divergence-free seeded initial data of unit E1 size."""
    return gen_initial(domain, seed=7, amplitude=1.0, spectrum_falloff=0.5)


def random_scalar(rng, domain, parity, real=True):
    """Masked random coefficients of the given parity."""
    coeff = rng.standard_normal(domain.shape) + 1j * rng.standard_normal(domain.shape)
    coeff = coeff * domain.mask
    if parity is Parity.ODD:
        coeff[..., 0] = 0.0
    f = SpectralScalar(domain, parity, coeff)
    return hermitian_part(f) if real else f
