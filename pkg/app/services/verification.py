"""Invariant suites behind the ``verify`` command."""

from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from app.core.elliptic import (
    biot_savart_ratio,
    curl,
    divergence,
    invert_dirichlet,
    invert_neumann,
    velocity_from_vorticity,
)
from app.core.propagator import (
    SIGMA_FLOOR,
    ModeDispersion,
    dispersion,
    exact_linear_coupled,
    solve_theta_linear,
)
from app.core.spectral import (
    Domain,
    Parity,
    SpectralScalar,
    boundary_trace,
    deriv,
    laplacian,
    sobolev_norm,
)
from app.services.decay_verifier import convolution_bound
from app.services.simulation import gen_initial
from app.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class CheckResult:
    """Outcome of one invariant check."""
    suite: str
    check: str
    value: float
    threshold: float
    passed: bool

    def as_row(self) -> Dict[str, object]:
        row = asdict(self)
        row["status"] = "pass" if self.passed else "fail"
        del row["passed"]
        return row


def _check(suite: str, name: str, value: float, threshold: float, upper: bool = True) -> CheckResult:
    ok = value <= threshold if upper else value >= threshold
    return CheckResult(suite, name, float(value), float(threshold), bool(ok))


BOUND_RTOL = 1e-12


def dispersion_bounds(d: ModeDispersion, rtol: float = BOUND_RTOL) -> Dict[str, np.ndarray]:
    """Per-mode masks of the eigenvalue brackets and the sigma floor."""
    q, Xi, lp, lm = d.q, d.Xi, d.lambda_plus, d.lambda_minus
    return {
        "lambda_plus_lower": lp >= -2.0 * q / Xi ** 2 * (1 + rtol),
        "lambda_plus_upper": lp <= -q / Xi ** 2 * (1 - rtol),
        "lambda_minus": (lm >= -Xi * (1 + rtol)) & (lm <= -Xi / 2 * (1 - rtol)),
        "sigma_floor": d.sigma >= SIGMA_FLOOR * (1 - rtol),
    }


def dispersion_suite(n_modes: int = 100_000, seed: int = 0) -> List[CheckResult]:
    """Bracketing bounds, sigma floor and characteristic identity on random modes."""
    rng = np.random.default_rng(seed)
    q = np.concatenate([[0.0, 1.0, 1.0e6], 10.0 ** rng.uniform(-8.0, 8.0, n_modes - 3)])
    k = np.concatenate([[1, 1, 1], rng.integers(1, 10_001, n_modes - 3)])
    d = dispersion(q, k)
    Xi, lp, lm = d.Xi, d.lambda_plus, d.lambda_minus
    masks = dispersion_bounds(d)
    residual = max(
        float(np.max(np.abs(lam ** 2 + Xi * lam + q / Xi) / Xi ** 2)) for lam in (lp, lm)
    )
    return [
        _check("dispersion", f"{name}_violations", int(np.sum(~mask)), 0)
        for name, mask in masks.items()
    ] + [
        _check("dispersion", "characteristic_residual", residual, 1e-12),
    ]


def _random_odd(rng, domain: Domain) -> SpectralScalar:
    coeff = rng.standard_normal(domain.shape) + 1j * rng.standard_normal(domain.shape)
    coeff[..., 0] = 0.0
    return SpectralScalar(domain, Parity.ODD, coeff * domain.mask)


def _random_even(rng, domain: Domain) -> SpectralScalar:
    coeff = rng.standard_normal(domain.shape) + 1j * rng.standard_normal(domain.shape)
    coeff[0, 0, 0] = 0.0
    return SpectralScalar(domain, Parity.EVEN, coeff * domain.mask)


def elliptic_suite(domain: Optional[Domain] = None, seed: int = 0, trials: int = 4) -> List[CheckResult]:
    """Poisson residuals, Biot-Savart round trip and its norm bound."""
    domain = domain or Domain.create(32, 32, 11)
    rng = np.random.default_rng(seed)
    dirichlet = neumann = roundtrip = ratio = 0.0
    for _ in range(trials):
        f = _random_odd(rng, domain)
        residual = -laplacian(invert_dirichlet(f)) - f
        dirichlet = max(dirichlet, residual.coeff_norm() / f.coeff_norm())
        g = _random_even(rng, domain)
        residual = -laplacian(invert_neumann(g)) - g
        neumann = max(neumann, residual.coeff_norm() / g.coeff_norm())

        state = gen_initial(domain, int(rng.integers(2 ** 31)), 1.0, 0.5)
        w = state.omega
        back = curl(velocity_from_vorticity(w))
        roundtrip = max(roundtrip, (back - w).norm(0) / w.norm(0))
        ratio = max(ratio, biot_savart_ratio(w, 1))
    return [
        _check("elliptic", "dirichlet_residual", dirichlet, 1e-12),
        _check("elliptic", "neumann_residual", neumann, 1e-12),
        _check("elliptic", "curl_velocity_roundtrip", roundtrip, 1e-10),
        _check("elliptic", "biot_savart_ratio", ratio, 4.0),
    ]


def formulation_suite(
    domain: Optional[Domain] = None,
    seed: int = 0,
    times=(0.1, 1.0, 10.0),
) -> List[CheckResult]:
    """First-order coupled system against the second-order temperature form."""
    domain = domain or Domain.create(16, 16, 5)
    state = gen_initial(domain, seed, 1.0, 0.5)
    linear_rate = -velocity_from_vorticity(state.omega)[2]
    results = []
    for t in times:
        coupled = exact_linear_coupled(state, t).theta
        second = solve_theta_linear(state.theta, linear_rate, None, t)
        err = (coupled - second).coeff_norm() / max(state.theta.coeff_norm(), 1e-300)
        results.append(_check("formulation", f"theta_agreement_t={t:g}", err, 1e-10))
    return results


def convolution_suite(times=(10.0, 100.0, 1000.0), band: float = 1.5) -> List[CheckResult]:
    """Rescaled convolution integrals stay inside a bounded band."""
    results = []
    for mu, nu in ((1.5, 0.5), (1.0, 1.0), (2.0, 1.0)):
        ratios = [convolution_bound(t, mu, nu)[1] for t in times]
        spread = max(ratios) / min(ratios)
        results.append(_check("convolution", f"algebraic_mu={mu:g}_nu={nu:g}", spread, band))
    ratios = [convolution_bound(t, 1.0, 1.0, variant="exponential")[1] for t in times]
    results.append(_check("convolution", "exponential_nu=1", max(ratios) / min(ratios), band))
    return results


def parity_suite(domain: Optional[Domain] = None, seed: int = 0) -> List[CheckResult]:
    """Divergence and boundary behaviour of generated data."""
    domain = domain or Domain.create(16, 16, 7)
    state = gen_initial(domain, seed, 1.0, 0.5)
    scale = max(state.theta.coeff_norm(), 1e-300)
    bottom, top = boundary_trace(state.theta)
    odd_trace = max(np.max(np.abs(bottom)), np.max(np.abs(top))) / scale
    b, t = boundary_trace(deriv(state.omega[2], "z"))
    flux = max(np.max(np.abs(b)), np.max(np.abs(t))) / max(state.omega[2].coeff_norm(), 1e-300)
    div = sobolev_norm(divergence(state.omega), 0) / max(state.omega.norm(1), 1e-300)
    return [
        _check("parity", "odd_boundary_trace", odd_trace, 1e-12),
        _check("parity", "even_boundary_flux", flux, 1e-10),
        _check("parity", "initial_divergence", div, 1e-12),
    ]


SUITES: Dict[str, Callable[[], List[CheckResult]]] = {
    "dispersion": dispersion_suite,
    "elliptic": elliptic_suite,
    "formulation": formulation_suite,
    "convolution": convolution_suite,
    "parity": parity_suite,
}


def run_suites(names: Optional[List[str]] = None) -> List[CheckResult]:
    names = list(SUITES) if names is None else names
    results: List[CheckResult] = []
    for name in names:
        logger.info(f"Running {name} checks")
        suite_results = SUITES[name]()
        failed = [r.check for r in suite_results if not r.passed]
        if failed:
            logger.warning(f"{name} checks failed: {failed}")
        results.extend(suite_results)
    return results
