"""Continuous-frequency kernel norms and algebraic decay-rate fitting.

Kernel norms are integrals over the whole (xi, eta) plane and a finite set of
vertical modes, evaluated in polar coordinates with geometric radial panels
so the O(t^{-1/2}) neighbourhood of q = 0 that carries the slow decay stays
resolved at every t.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from app.core.propagator import bracket, dispersion_from_symbols, semigroup_factors
from app.errors import ContractError, InsufficientDataError
from app.utils.logging import get_logger

logger = get_logger(__name__)

MIN_FIT_POINTS = 5
TAIL_TOLERANCE = 0.01
DEFAULT_FIT_WINDOW = (1.0e3, 1.0e5)
RATE_TOLERANCE = 0.1


class KernelKind(str, Enum):
    """Mode multipliers of the linear temperature propagator."""
    L1 = "L1"
    L2 = "L2"
    DTL1 = "dtL1"
    DTL2 = "dtL2"
    HEAT = "heatG"


class HorizontalMultiplier(str, Enum):
    NONE = "none"
    GRAD_H = "grad_h"
    GRAD_H2 = "grad_h2"
    D3 = "d3"


class HatNorm(str, Enum):
    HAT_L1 = "hat_L1"
    HAT_L2 = "hat_L2"


class ProfileFamily(str, Enum):
    GAUSSIAN = "gaussian"
    ALGEBRAIC = "algebraic"


@dataclass(frozen=True)
class Profile:
    """Test function p(xi, eta, k) = radial(q) * A(k), k = 1..len(A)."""
    family: ProfileFamily = ProfileFamily.GAUSSIAN
    vertical_weights: Tuple[float, ...] = (1.0,)
    decay_power: float = 8.0

    def __post_init__(self):
        if not self.vertical_weights:
            raise ContractError("profile needs at least one vertical weight")
        if self.family is ProfileFamily.ALGEBRAIC and self.decay_power <= 1.0:
            raise ContractError(
                "algebraic profile must decay faster than (1+q)^-1",
                {"decay_power": self.decay_power},
            )

    def radial(self, q: np.ndarray) -> np.ndarray:
        if self.family is ProfileFamily.GAUSSIAN:
            return np.exp(-q)
        return np.power(1.0 + q, -self.decay_power)

    @property
    def smoothness(self) -> float:
        """Largest s with a finite W^{s,1}-type weighted norm."""
        if self.family is ProfileFamily.GAUSSIAN:
            return math.inf
        return 2.0 * self.decay_power - 2.0

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.vertical_weights, dtype=float)


@dataclass(frozen=True)
class QuadratureSpec:
    """Polar quadrature over the (xi, eta) plane."""
    R: float = 8.0
    n_r: int = 96
    n_phi: int = 1
    Kq: Optional[int] = None
    q_min: float = 0.0
    gauss_order: int = 16
    r_floor: float = 1.0e-7

    def __post_init__(self):
        if self.R <= 0 or self.n_r <= 0 or self.n_phi <= 0 or self.gauss_order <= 0:
            raise ContractError("quadrature sizes must be positive")
        if self.q_min < 0 or self.q_min >= self.R ** 2:
            raise ContractError("q_min must lie in [0, R^2)", {"q_min": self.q_min})

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.R, self.n_r * factor, self.n_phi, self.Kq,
                              self.q_min, self.gauss_order, self.r_floor)

    def widened(self, factor: float = 2.0) -> "QuadratureSpec":
        return QuadratureSpec(self.R * factor, self.n_r, self.n_phi, self.Kq,
                              self.q_min, self.gauss_order, self.r_floor)


@dataclass
class KernelNorm:
    """A kernel norm together with its radial truncation estimate."""
    t: float
    value: float
    tail: float
    accurate: bool


@dataclass
class RateFit:
    """Least-squares slope of log(value) against log(t)."""
    exponent: float
    stderr: float
    window: Tuple[float, float]
    r_squared: float
    n_points: int
    intercept: float = 0.0

    def prefactor(self) -> float:
        return float(np.exp(self.intercept))


def _radial_rule(r_lo: float, r_hi: float, spec: QuadratureSpec, geometric: bool) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(spec.gauss_order)
    if geometric:
        start = max(r_lo, spec.r_floor * r_hi)
        edges = np.geomspace(start, r_hi, spec.n_r + 1)
        if r_lo < start:
            edges = np.concatenate(([r_lo], edges))
    else:
        edges = np.linspace(r_lo, r_hi, spec.n_r + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _angular_weight(spec: QuadratureSpec) -> float:
    # profiles and kernels depend on q only; the n_phi-point trapezoid sums to 2 pi
    return float(np.sum(np.full(spec.n_phi, 2.0 * np.pi / spec.n_phi)))


def kernel_multiplier(
    t: float,
    kernel: KernelKind,
    hmult: HorizontalMultiplier,
    q: np.ndarray,
    k: np.ndarray,
) -> np.ndarray:
    """|m(q, k, t)| on a (q, k) grid; q and k broadcast against each other."""
    kernel = KernelKind(kernel)
    hmult = HorizontalMultiplier(hmult)
    Xi = q + (np.pi * k) ** 2
    if kernel is KernelKind.HEAT:
        factor = np.exp(-q * t / Xi ** 2)
    else:
        l1, l2, dl1, dl2 = semigroup_factors(t, dispersion_from_symbols(q, Xi))
        factor = {
            KernelKind.L1: l1,
            KernelKind.L2: l2,
            KernelKind.DTL1: dl1,
            KernelKind.DTL2: dl2,
        }[kernel]
    factor = np.abs(factor)
    if hmult is HorizontalMultiplier.GRAD_H:
        factor = factor * np.sqrt(q)
    elif hmult is HorizontalMultiplier.GRAD_H2:
        factor = factor * q
    elif hmult is HorizontalMultiplier.D3:
        factor = factor * np.pi * k
    return factor


def _integrate(
    t: float,
    kernel: KernelKind,
    hmult: HorizontalMultiplier,
    norm: HatNorm,
    profile: Profile,
    spec: QuadratureSpec,
    r_lo: float,
    r_hi: float,
    geometric: bool,
) -> float:
    """Sum over k of the radial integral; squared for the L-hat^2 norm."""
    r, w = _radial_rule(r_lo, r_hi, spec, geometric)
    weights = profile.weights
    kq = len(weights) if spec.Kq is None else min(spec.Kq, len(weights))
    k = np.arange(1, kq + 1, dtype=float)[:, None]
    amp = np.abs(weights[:kq])[:, None]
    q = (r ** 2)[None, :]
    m = kernel_multiplier(t, kernel, hmult, q, k)
    p = amp * profile.radial(q)
    jac = _angular_weight(spec) * r * w
    if HatNorm(norm) is HatNorm.HAT_L1:
        return float(np.sum((m * p) @ jac))
    return float(np.sum(((m * p) ** 2) @ jac))


def evaluate_kernel(
    t: float,
    kernel,
    hmult="none",
    norm="hat_L1",
    profile: Optional[Profile] = None,
    quad: Optional[QuadratureSpec] = None,
) -> KernelNorm:
    """Kernel norm with a tail estimate from the annulus R <= |(xi, eta)| <= 2R."""
    if t < 0:
        raise ContractError("kernel norms need t >= 0", {"t": t})
    profile = profile or Profile()
    quad = quad or QuadratureSpec()
    norm = HatNorm(norm)
    r_lo = math.sqrt(quad.q_min)
    body = _integrate(t, kernel, hmult, norm, profile, quad, r_lo, quad.R, geometric=True)
    tail = _integrate(t, kernel, hmult, norm, profile, quad, quad.R, 2.0 * quad.R, geometric=False)
    if norm is HatNorm.HAT_L2:
        value = math.sqrt(body)
        tail = math.sqrt(body + tail) - value
    else:
        value = body
    accurate = tail <= TAIL_TOLERANCE * value if value > 0 else tail == 0.0
    if not accurate:
        logger.warning(
            f"Kernel norm truncation dominated at t={t}: tail {tail:.3e} vs value {value:.3e}",
            kernel=KernelKind(kernel).value,
            R=quad.R,
        )
    return KernelNorm(t=float(t), value=value, tail=tail, accurate=accurate)


def kernel_norm(
    t: float,
    kernel,
    hmult="none",
    norm="hat_L1",
    profile: Optional[Profile] = None,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    return evaluate_kernel(t, kernel, hmult, norm, profile, quad).value


def fit_rate(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> RateFit:
    """Fit values ~ C t^exponent on log-log axes.

    Points outside ``window`` are dropped before fitting.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ContractError("times and values differ in length")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if t.size < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"rate fit needs at least {MIN_FIT_POINTS} samples, got {t.size}",
            {"n_points": int(t.size), "window": window},
        )
    if np.any(np.diff(t) <= 0):
        raise ContractError("fit times must be strictly increasing")
    if np.any(t <= 1.0):
        raise ContractError("fit times must exceed 1 so that <t> = t", {"t_min": float(t[0])})
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ContractError("fit values must be positive and finite")

    result = stats.linregress(np.log(t), np.log(v))
    return RateFit(
        exponent=float(result.slope),
        stderr=float(result.stderr),
        window=(float(t[0]), float(t[-1])),
        r_squared=float(result.rvalue ** 2),
        n_points=int(t.size),
        intercept=float(result.intercept),
    )


def local_exponents(times: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Point-to-point log-log slopes, one-sided at the ends."""
    logt = np.log(np.asarray(times, dtype=float))
    logv = np.log(np.asarray(values, dtype=float))
    if logt.size < 2:
        return np.zeros(logt.size)
    return np.gradient(logv, logt, edge_order=1)


def convolution_bound(
    t: float,
    mu: float,
    nu: float,
    nquad: int = 32,
    variant: str = "algebraic",
) -> Tuple[float, float]:
    """Evaluate the decay-convolution integrals and their rescaled ratio.

    ``algebraic``: int_0^t <t-s>^-mu <s>^-(1+nu) ds, ratio = integral * <t>^mu.
    ``exponential``: int_0^t e^-(t-s) <s>^-nu ds, ratio = integral * <t>^nu.
    The integrand has kinks at s = 1 and s = t - 1 (from the bracket), so the
    composite Gauss-Legendre rule uses graded panels split at those points.
    """
    if mu <= 0 or nu <= 0:
        raise ContractError("convolution exponents must be positive", {"mu": mu, "nu": nu})
    if t < 0:
        raise ContractError("convolution bound needs t >= 0", {"t": t})
    if t == 0:
        return 0.0, 0.0

    if variant == "algebraic":
        def integrand(s):
            return 1.0 / (np.maximum(1.0, t - s) ** mu * np.maximum(1.0, s) ** (1.0 + nu))
        scale = bracket(t) ** mu
    elif variant == "exponential":
        def integrand(s):
            return np.exp(-(t - s)) / np.maximum(1.0, s) ** nu
        scale = bracket(t) ** nu
    else:
        raise ContractError(f"unknown convolution variant {variant!r}")

    x, w = np.polynomial.legendre.leggauss(nquad)
    total = 0.0
    for a, b in _graded_panels(t):
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b) + half * x
        total += half * float(np.dot(w, integrand(nodes)))
    return total, total * scale


def _graded_panels(t: float, ratio: float = 2.0) -> List[Tuple[float, float]]:
    """Panels on [0, t] geometric away from the kinks at 1 and t - 1."""
    breaks = sorted({0.0, t, min(1.0, t), max(0.0, t - 1.0)})
    panels: List[Tuple[float, float]] = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 2.0:
            panels.append((a, b))
            continue
        mid = 0.5 * (a + b)
        # grade outwards from both ends towards the middle
        edges = [a]
        step = 1.0
        while edges[-1] + step < mid:
            edges.append(edges[-1] + step)
            step *= ratio
        right = [b]
        step = 1.0
        while right[-1] - step > mid:
            right.append(right[-1] - step)
            step *= ratio
        edges.append(mid)
        edges.extend(reversed(right))
        panels.extend(zip(edges[:-1], edges[1:]))
    return [(a, b) for a, b in panels if b > a]


def convolution_reference(t: float, mu: float, nu: float, variant: str = "algebraic") -> float:
    """Adaptive quadrature of the same integral, split at the bracket kinks."""
    if variant == "algebraic":
        def integrand(s):
            return 1.0 / (max(1.0, t - s) ** mu * max(1.0, s) ** (1.0 + nu))
    else:
        def integrand(s):
            return math.exp(-(t - s)) / max(1.0, s) ** nu
    points = [p for p in (1.0, t - 1.0) if 0.0 < p < t]
    value, _ = integrate.quad(integrand, 0.0, t, points=points or None, limit=500, epsabs=0.0, epsrel=1e-12)
    return float(value)


@dataclass(frozen=True)
class SuiteEntry:
    """One row of the kernel decay table: a sum of kernel norms with a target exponent."""
    name: str
    terms: Tuple[Tuple[KernelKind, HorizontalMultiplier], ...]
    norm: HatNorm
    target: float


_PAIR = (KernelKind.L1, KernelKind.L2)
_DT_PAIR = (KernelKind.DTL1, KernelKind.DTL2)


def _pair(kernels, hmult) -> Tuple[Tuple[KernelKind, HorizontalMultiplier], ...]:
    return tuple((kind, hmult) for kind in kernels)


SUITE: Tuple[SuiteEntry, ...] = (
    SuiteEntry("L_hatL1", _pair(_PAIR, HorizontalMultiplier.NONE), HatNorm.HAT_L1, -1.0),
    SuiteEntry("d3L_hatL1", _pair(_PAIR, HorizontalMultiplier.D3), HatNorm.HAT_L1, -1.0),
    SuiteEntry("dtL_hatL1", _pair(_DT_PAIR, HorizontalMultiplier.NONE), HatNorm.HAT_L1, -2.0),
    SuiteEntry("gradhL_hatL1", _pair(_PAIR, HorizontalMultiplier.GRAD_H), HatNorm.HAT_L1, -1.5),
    SuiteEntry("L_hatL2", _pair(_PAIR, HorizontalMultiplier.NONE), HatNorm.HAT_L2, -0.5),
    SuiteEntry("dtL_hatL2", _pair(_DT_PAIR, HorizontalMultiplier.NONE), HatNorm.HAT_L2, -1.5),
    SuiteEntry("gradhL_hatL2", _pair(_PAIR, HorizontalMultiplier.GRAD_H), HatNorm.HAT_L2, -1.0),
    SuiteEntry("gradh2L_hatL2", _pair(_PAIR, HorizontalMultiplier.GRAD_H2), HatNorm.HAT_L2, -1.5),
)

HEAT_SUITE: Tuple[SuiteEntry, ...] = (
    SuiteEntry("G_hatL1", ((KernelKind.HEAT, HorizontalMultiplier.NONE),), HatNorm.HAT_L1, -1.0),
    SuiteEntry("gradhG_hatL1", ((KernelKind.HEAT, HorizontalMultiplier.GRAD_H),), HatNorm.HAT_L1, -1.5),
    SuiteEntry("G_hatL2", ((KernelKind.HEAT, HorizontalMultiplier.NONE),), HatNorm.HAT_L2, -0.5),
    SuiteEntry("gradhG_hatL2", ((KernelKind.HEAT, HorizontalMultiplier.GRAD_H),), HatNorm.HAT_L2, -1.0),
)


def suite_entries(names: Optional[Sequence[str]] = None, include_heat: bool = False) -> List[SuiteEntry]:
    entries = list(SUITE) + (list(HEAT_SUITE) if include_heat else [])
    if names is None:
        return entries
    known = {e.name: e for e in SUITE + HEAT_SUITE}
    unknown = [n for n in names if n not in known]
    if unknown:
        raise ContractError(f"unknown kernel rows: {unknown}", {"known": sorted(known)})
    return [known[n] for n in names]


@dataclass
class SuiteRow:
    """Fitted exponent of one table row against its target."""
    name: str
    target: float
    times: List[float]
    values: List[float]
    fit: Optional[RateFit] = None
    accurate: bool = True
    status: str = "pass"
    tolerance: float = RATE_TOLERANCE
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def summary(self) -> Dict[str, object]:
        return {
            "observable": self.name,
            "fitted_exponent": None if self.fit is None else round(self.fit.exponent, 6),
            "stderr": None if self.fit is None else self.fit.stderr,
            "target_exponent": self.target,
            "t_min": None if self.fit is None else self.fit.window[0],
            "t_max": None if self.fit is None else self.fit.window[1],
            "r_squared": None if self.fit is None else self.fit.r_squared,
            "accurate": self.accurate,
            "status": self.status,
        }


def evaluate_entry(
    entry: SuiteEntry,
    times: Sequence[float],
    profile: Optional[Profile] = None,
    quad: Optional[QuadratureSpec] = None,
    window: Tuple[float, float] = DEFAULT_FIT_WINDOW,
    tolerance: float = RATE_TOLERANCE,
) -> SuiteRow:
    """Evaluate one row over a time grid and fit its exponent inside ``window``."""
    times = [float(t) for t in times]
    if len(times) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"decay table needs at least {MIN_FIT_POINTS} times, got {len(times)}",
            {"row": entry.name},
        )
    values: List[float] = []
    accurate = True
    for t in times:
        total = 0.0
        for kind, hmult in entry.terms:
            result = evaluate_kernel(t, kind, hmult, entry.norm, profile, quad)
            total += result.value
            accurate = accurate and result.accurate
        values.append(total)

    row = SuiteRow(entry.name, entry.target, times, values, accurate=accurate, tolerance=tolerance)
    in_window = [t for t in times if window[0] <= t <= window[1]]
    if len(in_window) < MIN_FIT_POINTS:
        row.status = "window_invalid"
        row.notes.append(f"{len(in_window)} samples inside fit window {window}")
        logger.warning(f"Row {entry.name} has too few samples in window {window}")
        return row

    row.fit = fit_rate(times, values, window)
    if not accurate:
        row.status = "inaccurate"
    elif abs(row.fit.exponent - entry.target) > tolerance:
        row.status = "fail"
    logger.info(
        f"Kernel row {entry.name}: exponent {row.fit.exponent:.4f} (target {entry.target})",
        status=row.status,
    )
    return row


def default_time_grid(window: Tuple[float, float] = DEFAULT_FIT_WINDOW, points: int = 9) -> List[float]:
    return list(np.geomspace(window[0], window[1], points))


def decay_suite(
    times: Optional[Sequence[float]] = None,
    profile: Optional[Profile] = None,
    quad: Optional[QuadratureSpec] = None,
    rows: Optional[Sequence[str]] = None,
    include_heat: bool = False,
    window: Tuple[float, float] = DEFAULT_FIT_WINDOW,
    tolerance: float = RATE_TOLERANCE,
) -> List[SuiteRow]:
    """Kernel decay table: fitted against target exponents for every row."""
    times = default_time_grid(window) if times is None else list(times)
    entries = suite_entries(rows, include_heat)
    logger.info(f"Evaluating {len(entries)} kernel rows on {len(times)} times")
    return [evaluate_entry(e, times, profile, quad, window, tolerance) for e in entries]


def ray_decay(
    times: Sequence[float],
    q_min: float,
    kernel=KernelKind.L1,
    profile: Optional[Profile] = None,
    quad: Optional[QuadratureSpec] = None,
) -> RateFit:
    """Semilog fit of a kernel norm with the disc q < q_min removed.

    The slope is the observed exponential rate; it should approach
    lambda_+(q_min, 1) once the algebraic transient has passed.
    """
    quad = quad or QuadratureSpec()
    cut = QuadratureSpec(quad.R, quad.n_r, quad.n_phi, quad.Kq, q_min, quad.gauss_order, quad.r_floor)
    t = np.asarray(times, dtype=float)
    if t.size < MIN_FIT_POINTS:
        raise InsufficientDataError(f"semilog fit needs at least {MIN_FIT_POINTS} samples")
    v = np.array([kernel_norm(s, kernel, "none", "hat_L1", profile, cut) for s in t])
    result = stats.linregress(t, np.log(v))
    return RateFit(
        exponent=float(result.slope),
        stderr=float(result.stderr),
        window=(float(t[0]), float(t[-1])),
        r_squared=float(result.rvalue ** 2),
        n_points=int(t.size),
        intercept=float(result.intercept),
    )
