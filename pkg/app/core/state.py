"""Dynamical state (omega, theta, t) of the vorticity-temperature system."""

from dataclasses import dataclass, replace

import numpy as np

from app.core.elliptic import VectorField, VectorRole, relative_divergence, zero_vector
from app.core.spectral import Domain, Parity, SpectralScalar, zeros
from app.errors import DimensionError, ParityError


@dataclass(frozen=True)
class State:
    """Vorticity (Odd, Odd, Even) and temperature perturbation (Odd)."""
    omega: VectorField
    theta: SpectralScalar
    time: float = 0.0

    def __post_init__(self):
        if self.omega.role is not VectorRole.VORTICITY:
            raise ParityError("state vorticity must carry the vorticity role")
        if self.theta.parity is not Parity.ODD:
            raise ParityError("state temperature must be an Odd field")
        if self.theta.domain != self.omega.domain:
            raise DimensionError("vorticity and temperature live on different domains")

    @property
    def domain(self) -> Domain:
        return self.theta.domain

    @property
    def components(self):
        """(omega1, omega2, omega3, theta) in storage order."""
        return (self.omega[0], self.omega[1], self.omega[2], self.theta)

    def is_finite(self) -> bool:
        return self.omega.is_finite() and self.theta.is_finite()

    def with_time(self, time: float) -> "State":
        return replace(self, time=float(time))

    def mean_mode(self) -> complex:
        """(0, 0, 0) coefficient of omega3."""
        return complex(self.omega[2].coeff[0, 0, 0])

    def relative_divergence(self) -> float:
        return relative_divergence(self.omega)

    @classmethod
    def from_components(cls, domain: Domain, arrays, time: float = 0.0) -> "State":
        """Rebuild a state from four coefficient arrays."""
        w1, w2, w3, th = (np.asarray(a, dtype=complex) for a in arrays)
        omega = VectorField(
            (
                SpectralScalar(domain, Parity.ODD, w1),
                SpectralScalar(domain, Parity.ODD, w2),
                SpectralScalar(domain, Parity.EVEN, w3),
            ),
            VectorRole.VORTICITY,
        )
        return cls(omega, SpectralScalar(domain, Parity.ODD, th), float(time))


def zero_state(domain: Domain, time: float = 0.0) -> State:
    return State(zero_vector(domain, VectorRole.VORTICITY), zeros(domain, Parity.ODD), time)
