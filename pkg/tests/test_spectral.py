"""Tests for the mixed Fourier / sine-cosine transform layer."""

import numpy as np
import pytest

from app.core.spectral import (
    Axis,
    Domain,
    Parity,
    PhysicalScalar,
    SpectralScalar,
    boundary_trace,
    deriv,
    evaluate_z,
    hat_norm,
    linf_physical,
    lambda_pow,
    laplacian,
    product,
    product_parity,
    single_mode,
    sobolev_norm,
    to_physical,
    to_spectral,
    weighted_norm,
    zeros,
)
from app.errors import DimensionError, ParityError, SingularModeError
from tests.conftest import random_scalar


def _signed(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _mode_sum(f, x, y, z):
    """Real part of the direct O(N^2) mode sum at tensor points (x, y, z)."""
    d = f.domain
    xi = 2 * np.pi * _signed(d.Nx) / d.L
    eta = 2 * np.pi * _signed(d.Ny) / d.L
    kpi = np.pi * np.arange(d.Kmax + 1)
    trig = np.sin if f.parity is Parity.ODD else np.cos
    values = np.einsum(
        "nmk,nx,my,kz->xyz",
        f.coeff,
        np.exp(1j * xi[:, None] * x[None, :]),
        np.exp(1j * eta[:, None] * y[None, :]),
        trig(kpi[:, None] * z[None, :]),
        optimize=True,
    )
    return values.real


def _mode_projection(values, domain, parity):
    """Direct discrete projection of grid samples onto every retained mode."""
    x, y, z = domain.x_grid(), domain.y_grid(), domain.z_grid()
    xi = 2 * np.pi * _signed(domain.Nx) / domain.L
    eta = 2 * np.pi * _signed(domain.Ny) / domain.L
    kpi = np.pi * np.arange(domain.Kmax + 1)
    weights = np.full(domain.Kmax + 1, 2.0)
    if parity is Parity.ODD:
        basis = np.sin(kpi[:, None] * z[None, :])
    else:
        basis = np.cos(kpi[:, None] * z[None, :])
        weights[0] = 1.0
    coeff = np.einsum(
        "xyz,nx,my,kz->nmk",
        values,
        np.exp(-1j * xi[:, None] * x[None, :]),
        np.exp(-1j * eta[:, None] * y[None, :]),
        weights[:, None] * basis,
        optimize=True,
    )
    return coeff / (domain.Nx * domain.Ny * domain.Nz)


def _vertical_terms(pa, j, pb, k):
    """(mode, weight) pairs of b_j b_k from the product-to-sum identities."""
    if pa is pb:
        sign = -1.0 if pa is Parity.ODD else 1.0
        return [(abs(j - k), 0.5), (j + k, 0.5 * sign)]
    if pa is Parity.EVEN:
        j, k = k, j
    # sin(j) cos(k) = (sin(j + k) + sin(j - k)) / 2
    terms = [(j + k, 0.5)]
    if j != k:
        terms.append((abs(j - k), 0.5 if j > k else -0.5))
    return terms


def _exact_product(a, b):
    """Masked, truncated coefficients of a * b by direct convolution."""
    d = a.domain
    sx, sy = _signed(d.Nx).astype(int), _signed(d.Ny).astype(int)
    out = np.zeros(d.shape, dtype=complex)
    ia = np.argwhere(a.coeff != 0)
    ib = np.argwhere(b.coeff != 0)
    for n1, m1, j in ia:
        for n2, m2, k in ib:
            nx, ny = sx[n1] + sx[n2], sy[m1] + sy[m2]
            if 3 * abs(nx) >= d.Nx or 3 * abs(ny) >= d.Ny:
                continue
            weight = a.coeff[n1, m1, j] * b.coeff[n2, m2, k]
            for mode, factor in _vertical_terms(a.parity, j, b.parity, k):
                if mode <= d.Kmax:
                    out[nx % d.Nx, ny % d.Ny, mode] += factor * weight
    return out


class TestDomain:
    """Test grid construction and validation."""

    def test_default_vertical_resolution_is_alias_free(self):
        """Test that the default Nz is the smallest value with 2 Nz > 3 Kmax."""
        d = Domain.create(32, 32, 11)
        assert d.Nz == 17
        assert 2 * d.Nz > 3 * d.Kmax
        assert d.shape == (32, 32, 12)

    def test_aliasing_vertical_grid_rejected(self):
        """Test that too few collocation points raise a dimension error."""
        with pytest.raises(DimensionError):
            Domain.create(16, 16, 11, Nz=16)

    def test_odd_horizontal_size_rejected(self):
        """Test that odd grid sizes are refused."""
        with pytest.raises(DimensionError):
            Domain.create(15, 16, 3)

    def test_nyquist_removed_from_derivative_wavenumbers(self):
        """Test that odd derivatives see zero at the Nyquist row."""
        d = Domain.create(16, 16, 3)
        assert d.xi_odd[8, 0, 0] == 0.0
        assert d.xi[8, 0, 0] != 0.0
        assert d.q_min == pytest.approx((2 * np.pi / d.L) ** 2)


class TestTransforms:
    """Test analysis and synthesis."""

    @pytest.mark.parametrize("parity", [Parity.ODD, Parity.EVEN])
    def test_round_trip_recovers_coefficients(self, domain, rng, parity):
        """Test that synthesis followed by analysis is the identity on band-limited data."""
        f = random_scalar(rng, domain, parity)
        back = to_spectral(to_physical(f), parity)
        assert np.max(np.abs(back.coeff - f.coeff)) < 1e-12 * np.max(np.abs(f.coeff))

    def test_single_mode_matches_closed_form(self, domain):
        """Test that a lone mode synthesizes to cos(xi x) sin(k pi z) (real part)."""
        f = single_mode(domain, Parity.ODD, 1, 0, 2)
        x, _, z = domain.mesh()
        expected = np.cos(2 * np.pi * x / domain.L) * np.sin(2 * np.pi * z) * np.ones(domain.grid_shape)
        assert np.allclose(to_physical(f).values, expected, atol=1e-13)

    @pytest.mark.parametrize("parity", [Parity.ODD, Parity.EVEN])
    def test_synthesis_matches_direct_mode_sum(self, rng, parity):
        """Test to_physical against the O(N^2) sum, Nyquist rows and complex coefficients included."""
        d = Domain.create(8, 8, 3)
        coeff = rng.standard_normal(d.shape) + 1j * rng.standard_normal(d.shape)
        if parity is Parity.ODD:
            coeff[..., 0] = 0.0
        f = SpectralScalar(d, parity, coeff)
        expected = _mode_sum(f, d.x_grid(), d.y_grid(), d.z_grid())
        assert np.allclose(to_physical(f).values, expected, atol=1e-12)

    @pytest.mark.parametrize("parity", [Parity.ODD, Parity.EVEN])
    def test_analysis_matches_direct_projection(self, rng, parity):
        """Test to_spectral on arbitrary samples against the discrete inner products."""
        d = Domain.create(8, 8, 3)
        values = rng.standard_normal(d.grid_shape)
        out = to_spectral(PhysicalScalar(d, values), parity)
        assert np.allclose(out.coeff, _mode_projection(values, d, parity), atol=1e-13)

    def test_sample_shape_checked(self, domain):
        """Test that samples on the wrong grid are rejected."""
        with pytest.raises(DimensionError):
            to_spectral(PhysicalScalar(domain, np.zeros((4, 4, 4))), Parity.ODD)

    def test_odd_mode_zero_forbidden(self, domain):
        """Test that an Odd k = 0 mode cannot be requested."""
        with pytest.raises(ParityError):
            single_mode(domain, Parity.ODD, 0, 0, 0)

    def test_evaluate_z_agrees_with_collocation(self, domain, rng):
        """Test that point evaluation reproduces the grid samples."""
        f = random_scalar(rng, domain, Parity.EVEN)
        values = evaluate_z(f, domain.z_grid())
        assert np.allclose(values, to_physical(f).values, atol=1e-11)

    def test_odd_fields_vanish_on_the_walls(self, domain, rng):
        """Test that sine series have zero boundary traces."""
        bottom, top = boundary_trace(random_scalar(rng, domain, Parity.ODD))
        assert np.max(np.abs(bottom)) < 1e-12
        assert np.max(np.abs(top)) < 1e-10


class TestDerivatives:
    """Test spectral differentiation."""

    def test_vertical_derivative_flips_parity(self, domain):
        """Test that d/dz sin(k pi z) = k pi cos(k pi z)."""
        f = single_mode(domain, Parity.ODD, 0, 0, 3)
        df = deriv(f, Axis.Z)
        assert df.parity is Parity.EVEN
        assert df.coeff[0, 0, 3] == pytest.approx(3 * np.pi)

    def test_vertical_derivative_of_cosine(self, domain):
        """Test that d/dz cos(k pi z) = -k pi sin(k pi z) and kills the constant."""
        f = single_mode(domain, Parity.EVEN, 0, 0, 2) + single_mode(domain, Parity.EVEN, 0, 0, 0)
        df = deriv(f, "z")
        assert df.parity is Parity.ODD
        assert df.coeff[0, 0, 2] == pytest.approx(-2 * np.pi)
        assert df.coeff[0, 0, 0] == 0.0

    def test_vertical_derivative_converges_against_finite_differences(self, rng):
        """Test d/dz against a five-point stencil: errors fall at fourth order."""
        d = Domain.create(8, 8, 3)
        f = random_scalar(rng, d, Parity.ODD)
        z0 = 0.37
        exact = evaluate_z(deriv(f, Axis.Z), z0)[..., 0]
        errors = []
        for h in (0.02, 0.01):
            v = evaluate_z(f, [z0 - 2 * h, z0 - h, z0 + h, z0 + 2 * h])
            stencil = (v[..., 0] - 8 * v[..., 1] + 8 * v[..., 2] - v[..., 3]) / (12 * h)
            errors.append(np.max(np.abs(stencil - exact)))
        assert np.log2(errors[0] / errors[1]) >= 3.8

    def test_horizontal_derivative_against_finite_difference(self, domain):
        """Test that d/dx of a smooth mode matches the analytic derivative."""
        f = single_mode(domain, Parity.ODD, 2, 1, 1)
        x, y, z = domain.mesh()
        xi = 2 * 2 * np.pi / domain.L
        eta = 2 * np.pi / domain.L
        expected = -xi * np.sin(xi * x + eta * y) * np.sin(np.pi * z)
        assert np.allclose(to_physical(deriv(f, Axis.X)).values, expected, atol=1e-13)

    def test_laplacian_symbol(self, domain):
        """Test that the Laplacian multiplies by -(xi^2 + eta^2 + pi^2 k^2)."""
        f = single_mode(domain, Parity.ODD, 1, 1, 1)
        expected = -(2 * (2 * np.pi / domain.L) ** 2 + np.pi ** 2)
        assert laplacian(f).coeff[1, 1, 1] == pytest.approx(expected)

    def test_negative_power_rejects_mean_mode(self, domain):
        """Test that Lambda^-1 on a field with a constant part is singular."""
        f = single_mode(domain, Parity.EVEN, 0, 0, 0)
        with pytest.raises(SingularModeError):
            lambda_pow(f, -1.0)

    def test_lambda_powers_compose(self, domain, rng):
        """Test that Lambda^a Lambda^b = Lambda^(a+b) away from the mean."""
        f = random_scalar(rng, domain, Parity.ODD)
        lhs = lambda_pow(lambda_pow(f, 1.5), -0.5)
        rhs = lambda_pow(f, 1.0)
        assert np.allclose(lhs.coeff, rhs.coeff, rtol=1e-12)


class TestNorms:
    """Test norm conventions."""

    def test_l2_norm_is_cell_integral(self, domain):
        """Test that ||cos(xi x) sin(pi z)||_L2 equals L / 2."""
        f = single_mode(domain, Parity.ODD, 1, 0, 1, 0.5) + single_mode(domain, Parity.ODD, -1, 0, 1, 0.5)
        assert sobolev_norm(f, 0) == pytest.approx(domain.L / 2, rel=1e-12)

    def test_l2_norm_matches_quadrature(self, domain, rng):
        """Test that the spectral L2 norm equals the midpoint-rule integral of the samples."""
        f = random_scalar(rng, domain, Parity.EVEN)
        values = to_physical(f).values
        cell = domain.L ** 2 / (domain.Nx * domain.Ny * domain.Nz)
        assert sobolev_norm(f, 0) == pytest.approx(np.sqrt(cell * np.sum(values ** 2)), rel=1e-10)

    def test_horizontal_weight(self, domain):
        """Test that a horizontal gradient weight multiplies by |xi|."""
        f = single_mode(domain, Parity.ODD, 3, 0, 1)
        xi = 3 * 2 * np.pi / domain.L
        assert weighted_norm(f, 0, 1) == pytest.approx(xi * weighted_norm(f, 0))

    def test_sobolev_norms_increase_with_order(self, domain, rng):
        """Test monotonicity of H^m norms in m."""
        f = random_scalar(rng, domain, Parity.ODD)
        norms = [sobolev_norm(f, m) for m in range(4)]
        assert norms == sorted(norms)

    def test_linf_of_single_mode(self, domain):
        """Test that max |cos(xi x) sin(pi z)| is the largest grid value of sin(pi z)."""
        f = single_mode(domain, Parity.ODD, 1, 0, 1, 0.5) + single_mode(domain, Parity.ODD, -1, 0, 1, 0.5)
        assert linf_physical(f) == pytest.approx(np.max(np.sin(np.pi * domain.z_grid())), rel=1e-12)

    def test_linf_matches_direct_mode_sum(self, rng):
        """Test the sup norm against the largest directly summed grid value."""
        d = Domain.create(8, 8, 3)
        f = random_scalar(rng, d, Parity.EVEN)
        expected = np.max(np.abs(_mode_sum(f, d.x_grid(), d.y_grid(), d.z_grid())))
        assert linf_physical(f) == pytest.approx(expected, rel=1e-12)

    def test_hat_norms_of_zero_field(self, domain):
        """Test that every norm vanishes on zero."""
        f = zeros(domain, Parity.ODD)
        assert hat_norm(f, 1) == 0.0
        assert hat_norm(f, 2) == 0.0
        assert hat_norm(f, "inf") == 0.0


class TestProducts:
    """Test pseudo-spectral products."""

    def test_parity_rule(self):
        """Test the sin/cos product parity table."""
        assert product_parity(Parity.ODD, Parity.ODD) is Parity.EVEN
        assert product_parity(Parity.EVEN, Parity.EVEN) is Parity.EVEN
        assert product_parity(Parity.ODD, Parity.EVEN) is Parity.ODD

    def test_sine_squared(self, domain):
        """Test that sin^2(pi z) = 1/2 - cos(2 pi z)/2 exactly on the alias-free grid."""
        s = single_mode(domain, Parity.ODD, 0, 0, 1)
        sq = product(s, s)
        assert sq.parity is Parity.EVEN
        assert sq.coeff[0, 0, 0] == pytest.approx(0.5)
        assert sq.coeff[0, 0, 2] == pytest.approx(-0.5)
        rest = sq.coeff.copy()
        rest[0, 0, 0] = rest[0, 0, 2] = 0.0
        assert np.max(np.abs(rest)) < 1e-14

    @pytest.mark.parametrize("pa, pb", [
        (Parity.ODD, Parity.ODD),
        (Parity.ODD, Parity.EVEN),
        (Parity.EVEN, Parity.ODD),
        (Parity.EVEN, Parity.EVEN),
    ])
    def test_product_matches_exact_convolution(self, rng, pa, pb):
        """Test dealiased products of band-limited fields against the direct convolution."""
        d = Domain.create(8, 8, 3)
        a = random_scalar(rng, d, pa)
        b = random_scalar(rng, d, pb)
        out = product(a, b)
        expected = _exact_product(a, b)
        assert out.parity is product_parity(pa, pb)
        assert np.max(np.abs(out.coeff - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_highest_modes_do_not_alias(self):
        """Test that the product of two top vertical modes is resolved."""
        d = Domain.create(8, 8, 4)
        s = single_mode(d, Parity.ODD, 0, 0, 2)
        c = single_mode(d, Parity.EVEN, 0, 0, 2)
        out = product(s, c)
        # sin(2 pi z) cos(2 pi z) = sin(4 pi z) / 2
        assert out.coeff[0, 0, 4] == pytest.approx(0.5)

    def test_dealiasing_zeroes_top_third(self, domain, rng):
        """Test that dealiased products carry nothing outside the 2/3 band."""
        a = random_scalar(rng, domain, Parity.ODD)
        b = random_scalar(rng, domain, Parity.EVEN)
        out = product(a, b)
        assert np.all(out.coeff[~np.broadcast_to(domain.mask, domain.shape)] == 0)

    def test_mismatched_parity_arithmetic(self, domain):
        """Test that adding fields of different parity fails."""
        with pytest.raises(ParityError):
            zeros(domain, Parity.ODD) + zeros(domain, Parity.EVEN)
