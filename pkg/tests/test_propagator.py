"""Tests for the linear dispersion relation and propagators."""

import mpmath
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from app.core.elliptic import VectorField, VectorRole, velocity_from_vorticity
from app.core.propagator import (
    SIGMA_FLOOR,
    bracket,
    coupled_generator,
    dispersion,
    exact_linear_coupled,
    field_dispersion,
    heat_propagate,
    lattice_dispersion,
    semigroup_factors,
    solve_theta_linear,
)
from app.core.spectral import Parity, single_mode, zeros
from app.core.state import State
from app.errors import ContractError, ParityError
from app.services.verification import dispersion_bounds


def _roots_mp(q, k):
    """Both roots of lambda^2 + Xi lambda + q / Xi in 40-digit arithmetic."""
    with mpmath.workdps(40):
        Xi = mpmath.mpf(q) + (mpmath.pi * k) ** 2
        disc = mpmath.sqrt(Xi ** 2 - 4 * mpmath.mpf(q) / Xi)
        return float((-Xi + disc) / 2), float((-Xi - disc) / 2)


class TestDispersion:
    """Test eigenvalues of the temperature modes."""

    def test_zero_horizontal_symbol(self):
        """Test that q = 0, k = 1 gives lambda_+ = 0 exactly."""
        d = dispersion(0.0, 1)
        assert d.lambda_plus == 0.0
        assert d.lambda_minus == pytest.approx(-np.pi ** 2)

    def test_k_zero_is_contract_error(self):
        """Test that temperature modes need k >= 1."""
        with pytest.raises(ContractError):
            dispersion(1.0, 0)

    def test_negative_symbol_rejected(self):
        """Test that q < 0 is refused."""
        with pytest.raises(ContractError):
            dispersion(-1.0, 1)

    @pytest.mark.parametrize("q,k", [(1e-14, 1), (1e-6, 3), (0.5, 1), (1e3, 2), (1e8, 1), (3.0, 500)])
    def test_roots_match_high_precision(self, q, k):
        """Test that both roots agree with a 40-digit evaluation, including tiny q."""
        lp, lm = _roots_mp(q, k)
        d = dispersion(q, k)
        assert d.lambda_plus == pytest.approx(lp, rel=1e-13)
        assert d.lambda_minus == pytest.approx(lm, rel=1e-13)

    def test_bounds_on_random_modes(self):
        """Test the eigenvalue brackets and the sigma floor over many random modes."""
        rng = np.random.default_rng(0)
        q = 10.0 ** rng.uniform(-8, 8, 20_000)
        k = rng.integers(1, 10_001, 20_000)
        d = dispersion(q, k)
        for name, mask in dispersion_bounds(d).items():
            assert mask.all(), name
        assert np.min(d.sigma) >= SIGMA_FLOOR * (1 - 1e-12)

    def test_lattice_mode(self):
        """Test that lattice indices map to q = (2 pi / L)^2 (n^2 + m^2)."""
        L = 64 * np.pi
        d = lattice_dispersion(1, 2, 1, L)
        assert d.q == pytest.approx(5 * (2 * np.pi / L) ** 2)


class TestSemigroup:
    """Test the factors L1, L2 of the second-order temperature equation."""

    def test_initial_values(self):
        """Test L1(0) = 1, L2(0) = 0, L2'(0) = 1, L1'(0) = -Xi / 2."""
        d = dispersion(0.3, 2)
        l1, l2, dl1, dl2 = semigroup_factors(0.0, d)
        assert l1 == pytest.approx(1.0)
        assert l2 == pytest.approx(0.0)
        assert dl2 == pytest.approx(1.0)
        assert dl1 == pytest.approx(-d.Xi / 2)

    def test_negative_time_rejected(self):
        """Test that t < 0 is refused."""
        with pytest.raises(ContractError):
            semigroup_factors(-1.0, dispersion(1.0, 1))

    @pytest.mark.parametrize("t,expected", [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0), (40.0, 40.0)])
    def test_time_bracket(self, t, expected):
        """Test <t> = max(1, t)."""
        assert bracket(t) == expected

    def test_heat_propagation(self, domain):
        """Test that the heat semigroup multiplies by exp(-Xi t)."""
        f = single_mode(domain, Parity.ODD, 1, 0, 1)
        out = heat_propagate(f, 0.25)
        assert out.coeff[1, 0, 1] == pytest.approx(np.exp(-domain.Xi[1, 0, 1] * 0.25))


class TestSecondOrderSolve:
    """Test solve_theta_linear against an ODE integrator."""

    @pytest.fixture
    def mode(self, tiny_domain):
        d = tiny_domain
        return d, (1, 0, 1), float(field_dispersion(d).q[1, 0, 1]), float(d.Xi[1, 0, 1])

    def _ode(self, q, Xi, theta0, theta1, forcing, t):
        def f(_, y):
            return [y[1], -Xi * y[1] - q / Xi * y[0] + forcing]
        sol = solve_ivp(f, (0.0, t), [theta0, theta1], method="DOP853", rtol=1e-12, atol=1e-14)
        return sol.y[0, -1]

    def test_homogeneous_mode(self, mode):
        """Test the unforced solution of theta'' + Xi theta' + (q / Xi) theta = 0."""
        d, (n, m, k), q, Xi = mode
        theta0 = single_mode(d, Parity.ODD, n, m, k, 0.7)
        theta1 = single_mode(d, Parity.ODD, n, m, k, -0.2)
        out = solve_theta_linear(theta0, theta1, None, 2.0)
        expected = self._ode(q, Xi, 0.7, -0.2, 0.0, 2.0)
        assert out.coeff[n, m, k].real == pytest.approx(expected, rel=1e-9)

    def test_constant_forcing(self, mode):
        """Test the Duhamel term against direct integration with a constant source."""
        d, (n, m, k), q, Xi = mode
        theta0 = single_mode(d, Parity.ODD, n, m, k, 0.3)
        theta1 = zeros(d, Parity.ODD)
        source = single_mode(d, Parity.ODD, n, m, k, 0.05)
        out = solve_theta_linear(theta0, theta1, lambda s: source, 2.0, nquad=8, panels=8)
        expected = self._ode(q, Xi, 0.3, 0.0, 0.05, 2.0)
        assert out.coeff[n, m, k].real == pytest.approx(expected, rel=1e-8)

    def test_parity_checked(self, tiny_domain):
        """Test that cosine data is rejected."""
        even = single_mode(tiny_domain, Parity.EVEN, 1, 0, 1)
        with pytest.raises(ParityError):
            solve_theta_linear(even, even, None, 1.0)


class TestCoupledPropagator:
    """Test the first-order linear system for (omega, theta)."""

    def _state(self, domain, amps):
        n, m, k = 1, 1, 1
        w1 = single_mode(domain, Parity.ODD, n, m, k, amps[0])
        w2 = single_mode(domain, Parity.ODD, n, m, k, amps[1])
        w3 = single_mode(domain, Parity.EVEN, n, m, k, amps[2])
        th = single_mode(domain, Parity.ODD, n, m, k, amps[3])
        return State(VectorField((w1, w2, w3), VectorRole.VORTICITY), th, 1.5)

    def test_matches_ode_integration(self, tiny_domain):
        """Test the propagator on one mode against a complex ODE solve."""
        s = self._state(tiny_domain, (0.4, -0.1 + 0.2j, 0.3, 1.0))
        A = coupled_generator(tiny_domain)[1, 1, 1]
        sol = solve_ivp(
            lambda _, y: A @ y,
            (0.0, 1.0),
            np.array([0.4, -0.1 + 0.2j, 1.0], dtype=complex),
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
        )
        out = exact_linear_coupled(s, 1.0)
        got = [out.omega[0].coeff[1, 1, 1], out.omega[1].coeff[1, 1, 1], out.theta.coeff[1, 1, 1]]
        assert np.allclose(got, sol.y[:, -1], rtol=1e-9, atol=1e-12)
        assert out.omega[2].coeff[1, 1, 1] == pytest.approx(0.3 * np.exp(-tiny_domain.Xi[1, 1, 1]))
        assert out.time == pytest.approx(2.5)

    def test_horizontally_uniform_mode_decouples(self, tiny_domain):
        """Test that a q = 0 temperature mode is stationary."""
        th = single_mode(tiny_domain, Parity.ODD, 0, 0, 1, 2.0)
        s = State(self._state(tiny_domain, (0, 0, 0, 0)).omega, th)
        out = exact_linear_coupled(s, 5.0)
        assert out.theta.coeff[0, 0, 1] == pytest.approx(2.0)

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_agrees_with_second_order_form(self, state, t):
        """Test that both linear formulations give the same temperature."""
        theta1 = -velocity_from_vorticity(state.omega)[2]
        coupled = exact_linear_coupled(state, t).theta
        second = solve_theta_linear(state.theta, theta1, None, t)
        assert (coupled - second).coeff_norm() <= 1e-10 * state.theta.coeff_norm()

    def test_negative_time_rejected(self, state):
        """Test that backwards propagation is refused."""
        with pytest.raises(ContractError):
            exact_linear_coupled(state, -0.1)

    def test_odd_zero_mode_stays_empty(self, state):
        """Test that no k = 0 content appears in sine components."""
        out = exact_linear_coupled(state, 3.0)
        assert np.all(out.theta.coeff[..., 0] == 0)
        assert np.all(out.omega[0].coeff[..., 0] == 0)
