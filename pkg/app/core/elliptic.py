"""Poisson inversions, vector calculus and Biot-Savart on the slab."""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from app.core.spectral import (
    Axis,
    Domain,
    Parity,
    SpectralScalar,
    deriv,
    laplacian,
    weighted_norm,
    zeros,
)
from app.errors import ContractError, DimensionError, ParityError, SingularModeError


class VectorRole(str, Enum):
    """Parity pattern carried by a vector field."""
    VORTICITY = "vorticity"
    VELOCITY = "velocity"
    GENERIC = "generic"


class MeanPolicy(str, Enum):
    """What the Neumann inverse does with the (0, 0, 0) mode."""
    REJECT = "reject"
    PROJECT = "project"


ROLE_PARITIES = {
    VectorRole.VORTICITY: (Parity.ODD, Parity.ODD, Parity.EVEN),
    VectorRole.VELOCITY: (Parity.EVEN, Parity.EVEN, Parity.ODD),
}

DIVERGENCE_RTOL = 1e-10


@dataclass(frozen=True)
class VectorField:
    """Three spectral components with a role-specific parity pattern."""
    components: Tuple[SpectralScalar, SpectralScalar, SpectralScalar]
    role: VectorRole = VectorRole.GENERIC

    def __post_init__(self):
        if len(self.components) != 3:
            raise DimensionError("vector fields have three components")
        domain = self.components[0].domain
        if any(c.domain != domain for c in self.components):
            raise DimensionError("vector components live on different domains")
        expected = ROLE_PARITIES.get(self.role)
        if expected is not None and self.parities != expected:
            raise ParityError(
                f"{self.role.value} field needs parities "
                f"{[p.value for p in expected]}, got {[p.value for p in self.parities]}"
            )

    @property
    def domain(self) -> Domain:
        return self.components[0].domain

    @property
    def parities(self) -> Tuple[Parity, Parity, Parity]:
        return tuple(c.parity for c in self.components)

    def __getitem__(self, index: int) -> SpectralScalar:
        return self.components[index]

    def __iter__(self):
        return iter(self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self, other)), self.role)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self, other)), self.role)

    def __mul__(self, scalar) -> "VectorField":
        return VectorField(tuple(c * scalar for c in self), self.role)

    __rmul__ = __mul__

    def norm(self, m: float = 0, horizontal_power: int = 0) -> float:
        return float(np.sqrt(sum(weighted_norm(c, m, horizontal_power) ** 2 for c in self)))

    def is_finite(self) -> bool:
        return all(c.is_finite() for c in self)


def zero_vector(domain: Domain, role: VectorRole) -> VectorField:
    return VectorField(tuple(zeros(domain, p) for p in ROLE_PARITIES[role]), role)


def role_of(parities) -> VectorRole:
    for role, pattern in ROLE_PARITIES.items():
        if tuple(parities) == pattern:
            return role
    return VectorRole.GENERIC


def invert_dirichlet(f: SpectralScalar) -> SpectralScalar:
    """Solve -Lap psi = f with psi = 0 on z = 0, 1."""
    if f.parity is not Parity.ODD:
        raise ParityError("Dirichlet inverse needs an Odd (sine) field")
    Xi = f.domain.Xi
    inverse = np.where(Xi > 0, 1.0 / np.where(Xi > 0, Xi, 1.0), 0.0)
    return f.with_coeff(f.coeff * inverse)


def invert_neumann(f: SpectralScalar, mean_policy=MeanPolicy.REJECT) -> SpectralScalar:
    """Solve -Lap psi = f with d3 psi = 0 on z = 0, 1, psi defined up to a constant."""
    if f.parity is not Parity.EVEN:
        raise ParityError("Neumann inverse needs an Even (cosine) field")
    mean_policy = MeanPolicy(mean_policy)
    mean = f.coeff[0, 0, 0]
    if mean_policy is MeanPolicy.REJECT:
        if abs(mean) > 1e-12 * max(f.coeff_norm(), np.finfo(float).tiny):
            raise SingularModeError(
                "Neumann inverse of a field with nonzero mean",
                {"mean_mode": complex(mean)},
            )
    Xi = f.domain.Xi
    inverse = np.where(Xi > 0, 1.0 / np.where(Xi > 0, Xi, 1.0), 0.0)
    return f.with_coeff(f.coeff * inverse)


def gradient(psi: SpectralScalar) -> VectorField:
    comps = (deriv(psi, Axis.X), deriv(psi, Axis.Y), deriv(psi, Axis.Z))
    return VectorField(comps, role_of(c.parity for c in comps))


def curl(v: VectorField) -> VectorField:
    """Curl assembled from spectral derivatives."""
    role = role_of(v.parities)
    if role is VectorRole.GENERIC:
        raise ParityError(
            f"curl needs velocity or vorticity parities, got {[p.value for p in v.parities]}"
        )
    v1, v2, v3 = v
    comps = (
        deriv(v3, Axis.Y) - deriv(v2, Axis.Z),
        deriv(v1, Axis.Z) - deriv(v3, Axis.X),
        deriv(v2, Axis.X) - deriv(v1, Axis.Y),
    )
    out_role = VectorRole.VORTICITY if role is VectorRole.VELOCITY else VectorRole.VELOCITY
    return VectorField(comps, out_role)


def divergence(v: VectorField) -> SpectralScalar:
    v1, v2, v3 = v
    return deriv(v1, Axis.X) + deriv(v2, Axis.Y) + deriv(v3, Axis.Z)


def relative_divergence(w: VectorField) -> float:
    """||div w|| / ||grad w|| in L^2; zero for the zero field."""
    scale = w.norm(1)
    if scale == 0.0:
        return 0.0
    return weighted_norm(divergence(w), 0) / scale


def velocity_from_vorticity(w: VectorField, check_divergence: bool = True) -> VectorField:
    """Biot-Savart law: u = curl phi, -Lap phi = w with mixed boundary conditions."""
    if w.role is not VectorRole.VORTICITY:
        raise ParityError("velocity recovery needs a vorticity-role field")
    if check_divergence:
        rel = relative_divergence(w)
        if rel > DIVERGENCE_RTOL:
            raise ContractError(
                "vorticity is not divergence free", {"relative_divergence": rel}
            )
    phi1 = invert_dirichlet(w[0])
    phi2 = invert_dirichlet(w[1])
    phi3 = invert_neumann(w[2], MeanPolicy.REJECT)
    u1 = deriv(phi3, Axis.Y) - deriv(phi2, Axis.Z)
    u2 = deriv(phi1, Axis.Z) - deriv(phi3, Axis.X)
    u3 = deriv(phi2, Axis.X) - deriv(phi1, Axis.Y)
    return VectorField((u1, u2, u3), VectorRole.VELOCITY)


def project_vorticity(w: VectorField) -> VectorField:
    """Remove divergence drift: w <- curl(velocity_from_vorticity(w))."""
    return curl(velocity_from_vorticity(w, check_divergence=False))


def biot_savart_ratio(w: VectorField, m: float) -> float:
    """(||u3||_{H^{m+1}} + ||grad u||_{H^m}) / ||w||_{H^m}."""
    denom = w.norm(m)
    if denom == 0.0:
        return 0.0
    u = velocity_from_vorticity(w, check_divergence=False)
    grad_u = float(np.sqrt(sum(
        weighted_norm(deriv(c, axis), m) ** 2 for c in u for axis in Axis
    )))
    return (weighted_norm(u[2], m + 1) + grad_u) / denom
