"""Exact per-mode propagators of the linearized slab Boussinesq system.

Per Fourier-sine mode the temperature obeys

    theta'' + Xi theta' + (q / Xi) theta = F,   q = xi^2 + eta^2,  Xi = q + pi^2 k^2,

whose characteristic roots lambda_+ > lambda_- give the two semigroup factors
L1 = (e^{l+ t} + e^{l- t}) / 2 and L2 = (e^{l+ t} - e^{l- t}) / sigma.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from app.core.elliptic import VectorField, VectorRole
from app.core.state import State
from app.core.spectral import Parity, SpectralScalar
from app.errors import ContractError, ParityError

ArrayLike = Union[float, np.ndarray]
ForcingSampler = Callable[[float], SpectralScalar]

# lower bound of sigma over all k >= 1 modes
SIGMA_FLOOR = float(np.sqrt(np.pi ** 4 - 4.0))


def bracket(t: float) -> float:
    """<t> = max(1, t)."""
    return max(1.0, float(t))


@dataclass(frozen=True)
class ModeDispersion:
    """Linear spectrum of one (or an array of) temperature modes."""
    q: ArrayLike
    Xi: ArrayLike
    sigma: ArrayLike
    lambda_plus: ArrayLike
    lambda_minus: ArrayLike


def dispersion_from_symbols(q: np.ndarray, Xi: np.ndarray) -> ModeDispersion:
    # rationalized root: no cancellation between sigma and Xi
    ratio = 4.0 * q / Xi ** 3
    lam_plus = -2.0 * q / (Xi ** 2 * (1.0 + np.sqrt(1.0 - ratio)))
    lam_minus = -Xi - lam_plus
    sigma = lam_plus - lam_minus
    return ModeDispersion(q=q, Xi=Xi, sigma=sigma, lambda_plus=lam_plus, lambda_minus=lam_minus)


def dispersion(q: ArrayLike, k: ArrayLike) -> ModeDispersion:
    """Dispersion record for horizontal symbol q >= 0 and vertical index k >= 1."""
    q_arr = np.asarray(q, dtype=float)
    k_arr = np.asarray(k)
    if np.any(k_arr < 1):
        raise ContractError("temperature modes are sine modes; k must be >= 1", {"k": k_arr.tolist()})
    if np.any(q_arr < 0):
        raise ContractError("horizontal symbol q must be nonnegative")
    Xi = q_arr + (np.pi * k_arr) ** 2
    record = dispersion_from_symbols(q_arr, Xi)
    if record.sigma.ndim == 0:
        return ModeDispersion(*(float(v) for v in (record.q, record.Xi, record.sigma,
                                                    record.lambda_plus, record.lambda_minus)))
    return record


def lattice_dispersion(n: int, m: int, k: int, L: float) -> ModeDispersion:
    """Dispersion of the torus mode with wavenumbers (2 pi n / L, 2 pi m / L)."""
    base = 2.0 * np.pi / L
    return dispersion((base * n) ** 2 + (base * m) ** 2, k)


def horizontal_symbol(domain) -> np.ndarray:
    return domain.xi_odd ** 2 + domain.eta_odd ** 2


def field_dispersion(domain) -> ModeDispersion:
    """Dispersion over every (n, m, k >= 1) mode of a domain grid.

    The horizontal symbol is built from the derivative wavenumbers, so
    Nyquist rows see no coupling. The k = 0 slot is filled with harmless
    values (lambda_+ = 0) because Odd fields carry nothing there.
    """
    q = np.broadcast_to(horizontal_symbol(domain), domain.shape).astype(float)
    Xi = np.array(domain.Xi, dtype=float)
    Xi[..., 0] = np.maximum(Xi[..., 0], 1.0)
    return dispersion_from_symbols(np.where(np.arange(domain.Kmax + 1) > 0, q, 0.0), Xi)


def semigroup_factors(t: float, d: ModeDispersion) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """L1, L2 and their time derivatives at time t."""
    if t < 0:
        raise ContractError("semigroup factors need t >= 0", {"t": t})
    ep = np.exp(d.lambda_plus * t)
    em = np.exp(d.lambda_minus * t)
    l1 = 0.5 * (ep + em)
    l2 = (ep - em) / d.sigma
    dl1 = 0.5 * (d.lambda_plus * ep + d.lambda_minus * em)
    dl2 = (d.lambda_plus * ep - d.lambda_minus * em) / d.sigma
    return l1, l2, dl1, dl2


def heat_propagate(f: SpectralScalar, t: float) -> SpectralScalar:
    """Apply e^{t Lap}."""
    if t < 0:
        raise ContractError("heat semigroup needs t >= 0", {"t": t})
    return f.with_coeff(np.exp(-f.domain.Xi * t) * f.coeff)


def _gauss_nodes(t: float, nquad: int, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nquad)
    edges = np.linspace(0.0, t, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def solve_theta_linear(
    theta0: SpectralScalar,
    theta1: SpectralScalar,
    forcing: Optional[ForcingSampler],
    t: float,
    nquad: int = 8,
    panels: int = 1,
) -> SpectralScalar:
    """theta(t) = L1 theta0 + L2 (Lap^- theta0 / 2 + theta1) + int L2(t - s) F(s) ds.

    ``nquad`` is the Gauss-Legendre order on each of ``panels`` equal panels.
    """
    for name, f in (("theta0", theta0), ("theta1", theta1)):
        if f.parity is not Parity.ODD:
            raise ParityError(f"{name} must be an Odd field")
    if t < 0:
        raise ContractError("solve_theta_linear needs t >= 0", {"t": t})
    domain = theta0.domain
    d = field_dispersion(domain)
    l1, l2, _, _ = semigroup_factors(t, d)
    coeff = l1 * theta0.coeff + l2 * (0.5 * domain.Xi * theta0.coeff + theta1.coeff)

    if forcing is not None and t > 0:
        if nquad < 2:
            raise ContractError("Duhamel quadrature needs nquad >= 2", {"nquad": nquad})
        nodes, weights = _gauss_nodes(t, nquad, panels)
        for s, w in zip(nodes, weights):
            f_s = forcing(float(s))
            if f_s.parity is not Parity.ODD:
                raise ParityError("temperature forcing must be an Odd field")
            _, kernel, _, _ = semigroup_factors(t - s, d)
            coeff = coeff + w * kernel * f_s.coeff

    coeff[..., 0] = 0.0
    return theta0.with_coeff(coeff)


def coupled_generator(domain) -> np.ndarray:
    """Per-mode 3x3 generator acting on (omega1, omega2, theta)."""
    shape = domain.shape
    xi = np.broadcast_to(domain.xi_odd, shape)
    eta = np.broadcast_to(domain.eta_odd, shape)
    Xi = np.broadcast_to(domain.Xi, shape)
    safe = np.where(Xi > 0, Xi, 1.0)
    A = np.zeros(shape + (3, 3), dtype=complex)
    A[..., 0, 0] = -Xi
    A[..., 1, 1] = -Xi
    A[..., 0, 2] = 1j * eta
    A[..., 1, 2] = -1j * xi
    A[..., 2, 0] = 1j * eta / safe
    A[..., 2, 1] = -1j * xi / safe
    return A


def coupled_propagator(domain, t: float) -> np.ndarray:
    """exp(t A) for every mode, by scaling and squaring.

    Modes with q = 0 decouple and are written in closed form.
    """
    A = coupled_generator(domain)
    P = linalg.expm(t * A.reshape(-1, 3, 3)).reshape(A.shape)
    flat = np.broadcast_to(horizontal_symbol(domain), domain.shape) == 0
    heat = np.exp(-domain.Xi * t)[flat]
    P[flat] = 0.0
    P[flat, 0, 0] = heat
    P[flat, 1, 1] = heat
    P[flat, 2, 2] = 1.0
    return P


def exact_linear_coupled(s: State, t: float) -> State:
    """Propagate a state by the linearized system for time t.

    omega3 is pure heat decay; (omega1, omega2, theta) follow the per-mode
    3x3 linear system.
    """
    if t < 0:
        raise ContractError("exact_linear_coupled needs t >= 0", {"t": t})
    omega, theta = s.omega, s.theta
    P = coupled_propagator(s.domain, t)
    y = np.stack([omega[0].coeff, omega[1].coeff, theta.coeff], axis=-1)
    out = np.einsum("...ij,...j->...i", P, y)
    out[..., 0, :] = 0.0
    w1 = omega[0].with_coeff(out[..., 0])
    w2 = omega[1].with_coeff(out[..., 1])
    w3 = heat_propagate(omega[2], t)
    return State(
        VectorField((w1, w2, w3), VectorRole.VORTICITY),
        theta.with_coeff(out[..., 2]),
        s.time + t,
    )
