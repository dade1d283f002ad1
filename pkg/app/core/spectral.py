"""Mixed horizontal Fourier / vertical sine-cosine transforms on the slab.

Fields on the torus [0, L)^2 x (0, 1) are stored as

    f(x, y, z) = sum_{n, m, k} fhat[n, m, k] * exp(i(xi_n x + eta_m y)) * b_k(z)

with b_k = sin(k pi z) for Odd parity and cos(k pi z) for Even parity.
Coefficient arrays have shape (Nx, Ny, Kmax + 1), FFT ordering in n and m,
k running 0..Kmax. The k = 0 slot of an Odd field is always zero.

Norms use the continuous-frequency values g = (L^2 / 2 pi) * sqrt(nu_k) * fhat
(nu_0 = 1, nu_k = 1/2) with weight (2 pi / L)^2 per horizontal mode, which
makes ``sobolev_norm(f, 0)`` the L^2 norm over one period cell.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import fft as sfft

from app.config import settings
from app.errors import DimensionError, ParityError, SingularModeError

DEFAULT_PERIOD = 64.0 * np.pi


class Parity(str, Enum):
    """Vertical parity of a field."""
    ODD = "odd"
    EVEN = "even"

    def flip(self) -> "Parity":
        return Parity.EVEN if self is Parity.ODD else Parity.ODD


class Axis(str, Enum):
    """Differentiation axis."""
    X = "x"
    Y = "y"
    Z = "z"


@dataclass(frozen=True)
class Domain:
    """Periodic horizontal box of side L over the unit vertical interval."""
    Nx: int
    Ny: int
    Kmax: int
    Nz: int
    L: float = DEFAULT_PERIOD

    xi: np.ndarray = field(init=False, repr=False, compare=False)
    eta: np.ndarray = field(init=False, repr=False, compare=False)
    xi_odd: np.ndarray = field(init=False, repr=False, compare=False)
    eta_odd: np.ndarray = field(init=False, repr=False, compare=False)
    kpi: np.ndarray = field(init=False, repr=False, compare=False)
    q: np.ndarray = field(init=False, repr=False, compare=False)
    Xi: np.ndarray = field(init=False, repr=False, compare=False)
    mask: np.ndarray = field(init=False, repr=False, compare=False)
    nu: np.ndarray = field(init=False, repr=False, compare=False)

    @classmethod
    def create(
        cls,
        Nx: int,
        Ny: int,
        Kmax: int,
        Nz: Optional[int] = None,
        L: float = DEFAULT_PERIOD,
    ) -> "Domain":
        """Build a domain, choosing the smallest alias-free Nz when omitted."""
        if Nz is None:
            Nz = (3 * Kmax) // 2 + 1
        return cls(Nx=Nx, Ny=Ny, Kmax=Kmax, Nz=Nz, L=float(L))

    def __post_init__(self):
        for name in ("Nx", "Ny"):
            value = getattr(self, name)
            if value < 8 or value % 2:
                raise DimensionError(
                    f"{name} must be even and at least 8, got {value}",
                    {name: value},
                )
        if self.Kmax < 1:
            raise DimensionError(f"Kmax must be positive, got {self.Kmax}")
        if 2 * self.Nz <= 3 * self.Kmax:
            raise DimensionError(
                f"Nz={self.Nz} aliases quadratic terms for Kmax={self.Kmax}; "
                f"need Nz >= {(3 * self.Kmax) // 2 + 1}",
                {"Nz": self.Nz, "Kmax": self.Kmax},
            )
        if not self.L > 0:
            raise DimensionError(f"L must be positive, got {self.L}")

        nx = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)
        ny = np.fft.fftfreq(self.Ny, d=1.0 / self.Ny)
        base = 2.0 * np.pi / self.L
        xi = (base * nx)[:, None, None]
        eta = (base * ny)[None, :, None]
        # Nyquist rows are dropped from odd derivatives
        xi_odd = xi.copy()
        xi_odd[self.Nx // 2] = 0.0
        eta_odd = eta.copy()
        eta_odd[:, self.Ny // 2] = 0.0
        kpi = (np.pi * np.arange(self.Kmax + 1, dtype=float))[None, None, :]
        q = xi ** 2 + eta ** 2
        mask = (3 * np.abs(nx)[:, None] < self.Nx) & (3 * np.abs(ny)[None, :] < self.Ny)
        nu = np.full(self.Kmax + 1, 0.5)
        nu[0] = 1.0

        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "xi_odd", xi_odd)
        object.__setattr__(self, "eta_odd", eta_odd)
        object.__setattr__(self, "kpi", kpi)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "Xi", q + kpi ** 2)
        object.__setattr__(self, "mask", mask[:, :, None])
        object.__setattr__(self, "nu", nu[None, None, :])

    @property
    def shape(self) -> Tuple[int, int, int]:
        """Coefficient array shape."""
        return (self.Nx, self.Ny, self.Kmax + 1)

    @property
    def grid_shape(self) -> Tuple[int, int, int]:
        """Collocation grid shape."""
        return (self.Nx, self.Ny, self.Nz)

    @property
    def weight(self) -> float:
        """Riemann weight standing in for d(xi) d(eta)."""
        return (2.0 * np.pi / self.L) ** 2

    @property
    def q_min(self) -> float:
        """Smallest nonzero horizontal symbol."""
        return self.weight

    def z_grid(self) -> np.ndarray:
        return (np.arange(self.Nz) + 0.5) / self.Nz

    def x_grid(self) -> np.ndarray:
        return np.arange(self.Nx) * self.L / self.Nx

    def y_grid(self) -> np.ndarray:
        return np.arange(self.Ny) * self.L / self.Ny

    def mesh(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (x, y, z) collocation coordinates."""
        return (
            self.x_grid()[:, None, None],
            self.y_grid()[None, :, None],
            self.z_grid()[None, None, :],
        )

    def describe(self) -> dict:
        return {"L": self.L, "Nx": self.Nx, "Ny": self.Ny, "Kmax": self.Kmax, "Nz": self.Nz}


@dataclass(frozen=True)
class PhysicalScalar:
    """Real samples on the (x_i, y_j, z_l) collocation grid."""
    domain: Domain
    values: np.ndarray


@dataclass(frozen=True)
class SpectralScalar:
    """Coefficients of a slab field with a fixed vertical parity."""
    domain: Domain
    parity: Parity
    coeff: np.ndarray

    def __post_init__(self):
        if self.coeff.shape != self.domain.shape:
            raise DimensionError(
                f"coefficient shape {self.coeff.shape} does not match {self.domain.shape}"
            )

    def _check(self, other: "SpectralScalar"):
        if other.domain != self.domain:
            raise DimensionError("fields live on different domains")
        if other.parity is not self.parity:
            raise ParityError(
                f"cannot combine {self.parity.value} and {other.parity.value} fields"
            )

    def __add__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return self.with_coeff(self.coeff + other.coeff)

    def __sub__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return self.with_coeff(self.coeff - other.coeff)

    def __neg__(self) -> "SpectralScalar":
        return self.with_coeff(-self.coeff)

    def __mul__(self, scalar) -> "SpectralScalar":
        return self.with_coeff(self.coeff * scalar)

    __rmul__ = __mul__

    def with_coeff(self, coeff: np.ndarray) -> "SpectralScalar":
        return SpectralScalar(self.domain, self.parity, coeff)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeff)))

    def coeff_norm(self) -> float:
        """Plain l2 norm of the coefficient array."""
        return float(np.sqrt(np.sum(np.abs(self.coeff) ** 2)))


def zeros(domain: Domain, parity: Parity) -> SpectralScalar:
    return SpectralScalar(domain, parity, np.zeros(domain.shape, dtype=complex))


def single_mode(
    domain: Domain, parity: Parity, n: int, m: int, k: int, amplitude: complex = 1.0
) -> SpectralScalar:
    """Field with one coefficient set; (n, m) are signed horizontal indices."""
    if parity is Parity.ODD and k == 0:
        raise ParityError("Odd fields have no k = 0 mode")
    coeff = np.zeros(domain.shape, dtype=complex)
    coeff[n % domain.Nx, m % domain.Ny, k] = amplitude
    return SpectralScalar(domain, parity, coeff)


def _analyze_z(values: np.ndarray, parity: Parity, kmax: int) -> np.ndarray:
    nz = values.shape[-1]
    out = np.zeros(values.shape[:-1] + (kmax + 1,), dtype=values.dtype)
    if parity is Parity.ODD:
        modes = sfft.dst(values, type=2, axis=-1, workers=settings.fft_workers) / nz
        out[..., 1:] = modes[..., :kmax]
    else:
        modes = sfft.dct(values, type=2, axis=-1, workers=settings.fft_workers) / nz
        out[..., 0] = 0.5 * modes[..., 0]
        out[..., 1:] = modes[..., 1:kmax + 1]
    return out


def _synthesize_z(coeff: np.ndarray, parity: Parity, nz: int) -> np.ndarray:
    kmax = coeff.shape[-1] - 1
    work = np.zeros(coeff.shape[:-1] + (nz,), dtype=coeff.dtype)
    if parity is Parity.ODD:
        work[..., :kmax] = 0.5 * coeff[..., 1:]
        return sfft.dst(work, type=3, axis=-1, workers=settings.fft_workers)
    work[..., 0] = coeff[..., 0]
    work[..., 1:kmax + 1] = 0.5 * coeff[..., 1:]
    return sfft.dct(work, type=3, axis=-1, workers=settings.fft_workers)


def _hermitian_half(coeff: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Hermitian part of ``coeff`` on the m in [0, Ny/2] half plane."""
    half = ny // 2 + 1
    ix = (-np.arange(nx)) % nx
    iy = (-np.arange(half)) % ny
    mirrored = np.take(np.take(coeff, ix, axis=-3), iy, axis=-2)
    return 0.5 * (coeff[..., :half, :] + np.conj(mirrored))


def _horizontal_planes(coeff: np.ndarray, domain: Domain) -> np.ndarray:
    planes = sfft.irfft2(
        _hermitian_half(coeff, domain.Nx, domain.Ny),
        s=(domain.Nx, domain.Ny),
        axes=(-3, -2),
        workers=settings.fft_workers,
    )
    planes *= domain.Nx * domain.Ny
    return planes


def synthesize(coeff: np.ndarray, parity: Parity, domain: Domain) -> np.ndarray:
    """Real collocation samples of one or a stack of coefficient arrays.

    Leading axes are batch axes; the last three are (n, m, k). Only the
    Hermitian part contributes, so the result is the real part of the
    complex synthesis.
    """
    return _synthesize_z(_horizontal_planes(coeff, domain), parity, domain.Nz)


def analyze(values: np.ndarray, parity: Parity, domain: Domain) -> np.ndarray:
    """Coefficients of one or a stack of real sample arrays."""
    vertical = _analyze_z(np.asarray(values, dtype=float), parity, domain.Kmax)
    half = sfft.rfft2(vertical, axes=(-3, -2), workers=settings.fft_workers)
    half /= domain.Nx * domain.Ny
    nx, ny = domain.Nx, domain.Ny
    h = half.shape[-2]
    coeff = np.empty(half.shape[:-2] + (ny, half.shape[-1]), dtype=complex)
    coeff[..., :h, :] = half
    # negative m from the conjugate mirror of the stored half
    ix = (-np.arange(nx)) % nx
    iy = ny - np.arange(h, ny)
    coeff[..., h:, :] = np.conj(np.take(np.take(half, ix, axis=-3), iy, axis=-2))
    return coeff


def to_spectral(field_: PhysicalScalar, parity: Parity) -> SpectralScalar:
    """Analyze collocation samples into mixed Fourier/sine-cosine coefficients."""
    domain = field_.domain
    values = np.asarray(field_.values)
    if values.shape != domain.grid_shape:
        raise DimensionError(
            f"sample grid {values.shape} does not match {domain.grid_shape}",
            {"expected": domain.grid_shape, "got": values.shape},
        )
    return SpectralScalar(domain, parity, analyze(values, parity, domain))


def to_physical(f: SpectralScalar) -> PhysicalScalar:
    """Synthesize collocation samples; the real part is kept."""
    return PhysicalScalar(f.domain, synthesize(f.coeff, f.parity, f.domain))


def vertical_basis(parity: Parity, kmax: int, z: np.ndarray) -> np.ndarray:
    """Basis matrix of shape (kmax + 1, len(z))."""
    arg = np.pi * np.arange(kmax + 1)[:, None] * np.asarray(z, dtype=float)[None, :]
    if parity is Parity.ODD:
        basis = np.sin(arg)
        basis[0] = 0.0
        return basis
    return np.cos(arg)


def evaluate_z(f: SpectralScalar, z) -> np.ndarray:
    """Synthesize at arbitrary heights; returns shape (Nx, Ny, len(z))."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    planes = _horizontal_planes(f.coeff, f.domain)
    return planes @ vertical_basis(f.parity, f.domain.Kmax, z)


def boundary_trace(f: SpectralScalar) -> Tuple[np.ndarray, np.ndarray]:
    """Values on z = 0 and z = 1."""
    both = evaluate_z(f, [0.0, 1.0])
    return both[..., 0], both[..., 1]


def deriv(f: SpectralScalar, axis) -> SpectralScalar:
    """Spectral derivative; z derivatives flip parity."""
    axis = Axis(axis)
    domain = f.domain
    if axis is Axis.X:
        return f.with_coeff(1j * domain.xi_odd * f.coeff)
    if axis is Axis.Y:
        return f.with_coeff(1j * domain.eta_odd * f.coeff)
    # sin -> +k pi cos, cos -> -k pi sin
    sign = 1.0 if f.parity is Parity.ODD else -1.0
    coeff = sign * domain.kpi * f.coeff
    coeff[..., 0] = 0.0
    return SpectralScalar(domain, f.parity.flip(), coeff)


def laplacian(f: SpectralScalar) -> SpectralScalar:
    return f.with_coeff(-f.domain.Xi * f.coeff)


def _mean_mode_is_zero(f: SpectralScalar, rtol: float = 1e-12) -> bool:
    return abs(f.coeff[0, 0, 0]) <= rtol * max(f.coeff_norm(), np.finfo(float).tiny)


def lambda_pow(f: SpectralScalar, alpha: float) -> SpectralScalar:
    """Apply (xi^2 + eta^2 + pi^2 k^2)^(alpha / 2) coefficientwise."""
    Xi = f.domain.Xi
    if alpha >= 0:
        return f.with_coeff(np.power(Xi, 0.5 * alpha) * f.coeff)
    if not _mean_mode_is_zero(f):
        raise SingularModeError(
            f"Lambda^{alpha} is singular on the constant mode",
            {"mean_mode": complex(f.coeff[0, 0, 0])},
        )
    safe = np.where(Xi > 0, Xi, 1.0)
    symbol = np.where(Xi > 0, np.power(safe, 0.5 * alpha), 0.0)
    return f.with_coeff(symbol * f.coeff)


def hat_values(f: SpectralScalar) -> np.ndarray:
    """Continuous-frequency values behind every norm."""
    domain = f.domain
    return (domain.L ** 2 / (2.0 * np.pi)) * np.sqrt(domain.nu) * f.coeff


def weighted_norm(f: SpectralScalar, m: float, horizontal_power: int = 0) -> float:
    """Norm of the j-th horizontal gradient in H^m, j = horizontal_power."""
    domain = f.domain
    g2 = np.abs(hat_values(f)) ** 2
    weight = np.power(1.0 + domain.Xi, m)
    if horizontal_power:
        weight = weight * np.power(domain.q, horizontal_power)
    return float(np.sqrt(domain.weight * np.sum(weight * g2)))


def sobolev_norm(f: SpectralScalar, m: float) -> float:
    if m < 0:
        raise ValueError(f"Sobolev order must be nonnegative, got {m}")
    return weighted_norm(f, m)


def hat_norm(f: SpectralScalar, p) -> float:
    """L-hat^p norm of the coefficient function, p in {1, 2, inf}."""
    g = np.abs(hat_values(f))
    w = f.domain.weight
    if p == 1:
        return float(w * np.sum(g))
    if p == 2:
        return float(np.sqrt(w * np.sum(g ** 2)))
    if p in (np.inf, "inf"):
        return float(np.max(g)) if g.size else 0.0
    raise ValueError(f"unsupported hat norm exponent {p!r}")


def linf_physical(f: SpectralScalar) -> float:
    return float(np.max(np.abs(to_physical(f).values)))


def dealias(f: SpectralScalar) -> SpectralScalar:
    """Zero the top third of horizontal wavenumbers."""
    return f.with_coeff(f.coeff * f.domain.mask)


def hermitian_part(f: SpectralScalar) -> SpectralScalar:
    """Project onto coefficients of a real-valued field."""
    domain = f.domain
    ix = (-np.arange(domain.Nx)) % domain.Nx
    iy = (-np.arange(domain.Ny)) % domain.Ny
    mirrored = np.conj(f.coeff[ix][:, iy])
    return f.with_coeff(0.5 * (f.coeff + mirrored))


def product_parity(a: Parity, b: Parity) -> Parity:
    """sin*sin and cos*cos are cosine series, sin*cos is a sine series."""
    return Parity.EVEN if a is b else Parity.ODD


def product(a: SpectralScalar, b: SpectralScalar, dealiased: bool = True) -> SpectralScalar:
    """Pseudo-spectral product with 2/3-rule dealiasing and vertical truncation."""
    if a.domain != b.domain:
        raise DimensionError("product of fields on different domains")
    if dealiased:
        a, b = dealias(a), dealias(b)
    values = to_physical(a).values * to_physical(b).values
    out = to_spectral(PhysicalScalar(a.domain, values), product_parity(a.parity, b.parity))
    return dealias(out) if dealiased else out
