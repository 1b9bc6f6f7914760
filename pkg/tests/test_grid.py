"""Grid construction, quadrature, and spectral calculus."""

import math

import numpy as np
import pytest

from dampednls import (
    Grid,
    boundary_density_ratio,
    coordinate_mesh,
    integrate,
    inverse_transform,
    make_grid,
    spectral_gradient,
    spectral_upsample,
    transform,
)
from dampednls.grid import laplacian_symbol, radius_squared_mesh


class TestMakeGrid:
    def test_basic_1d(self):
        g = make_grid((256,), (8.0,))
        assert g.dim == 1
        assert g.shape == (256,)
        assert g.spacing == (16.0 / 256,)
        assert g.axes[0][0] == -8.0
        assert g.axes[0][-1] == pytest.approx(8.0 - 16.0 / 256)

    def test_axes_exclude_right_endpoint(self):
        g = make_grid((64, 32), (4.0, 2.0))
        for ax, L, n in zip(g.axes, g.half_width, g.points):
            assert ax.size == n
            assert ax[0] == -L
            assert ax[-1] < L

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            make_grid((48,), (4.0,))

    def test_rejects_too_small(self):
        with pytest.raises(ValueError):
            make_grid((4,), (4.0,))

    def test_rejects_bad_dim(self):
        with pytest.raises(ValueError):
            make_grid((), ())
        with pytest.raises(ValueError):
            make_grid((16, 16, 16, 16), (1.0, 1.0, 1.0, 1.0))

    def test_rejects_nonpositive_half_width(self):
        with pytest.raises(ValueError):
            make_grid((16,), (0.0,))

    def test_error_lists_every_problem(self):
        with pytest.raises(ValueError) as err:
            make_grid((48, 16), (4.0, -1.0))
        message = str(err.value)
        assert "48" in message
        assert "-1" in message

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            make_grid((16, 16), (4.0,))


class TestQuadrature:
    def test_constant_integrates_to_volume(self):
        g = make_grid((8, 8), (2.0, 2.0))
        assert integrate(g, np.ones(g.shape)) == pytest.approx(16.0)

    def test_gaussian_1d(self):
        g = make_grid((128,), (8.0,))
        x = g.axes[0]
        val = integrate(g, np.exp(-(x**2)))
        assert val == pytest.approx(math.sqrt(math.pi), abs=1e-12)

    def test_gaussian_3d(self):
        g = make_grid((32, 32, 32), (6.0, 6.0, 6.0))
        r2 = radius_squared_mesh(g)
        val = integrate(g, np.exp(-r2))
        assert val == pytest.approx(math.pi**1.5, rel=1e-12)

    def test_rejects_non_finite(self):
        g = make_grid((16,), (2.0,))
        field = np.ones(g.shape)
        field[3] = np.nan
        with pytest.raises(ValueError):
            integrate(g, field)

    def test_cell_and_mode_volume(self):
        g = make_grid((16, 32), (2.0, 8.0))
        assert g.cell_volume == pytest.approx((4.0 / 16) * (16.0 / 32))
        assert g.mode_volume == pytest.approx((math.pi / 2.0) * (math.pi / 8.0))


class TestSpectralGradient:
    def test_plane_wave(self):
        g = make_grid((64,), (math.pi,))
        x = g.axes[0]
        u = np.exp(1j * x)
        (du,) = spectral_gradient(g, u)
        np.testing.assert_allclose(du, 1j * u, atol=1e-12)

    def test_sine(self):
        g = make_grid((64,), (math.pi,))
        x = g.axes[0]
        (du,) = spectral_gradient(g, np.sin(2 * x).astype(complex))
        np.testing.assert_allclose(du, 2 * np.cos(2 * x), atol=1e-11)

    def test_gaussian_matches_analytic(self):
        g = make_grid((128,), (8.0,))
        x = g.axes[0]
        u = np.exp(-(x**2) / 2).astype(complex)
        (du,) = spectral_gradient(g, u)
        np.testing.assert_allclose(du, -x * u, atol=1e-12)

    def test_real_input_has_real_gradient(self):
        # the Nyquist mode is zeroed in the derivative symbol, so a real
        # field keeps a real derivative instead of leaking an imaginary part
        rng = np.random.default_rng(3)
        g = make_grid((32,), (2.0,))
        u = rng.standard_normal(32).astype(complex)
        (du,) = spectral_gradient(g, u)
        assert float(np.abs(du.imag).max()) < 1e-12

    def test_2d_components(self):
        g = make_grid((32, 32), (math.pi, math.pi))
        x = coordinate_mesh(g, 0)
        y = coordinate_mesh(g, 1)
        u = np.exp(1j * (2 * x - y))
        dux, duy = spectral_gradient(g, u)
        np.testing.assert_allclose(dux, 2j * u, atol=1e-11)
        np.testing.assert_allclose(duy, -1j * u, atol=1e-11)


class TestTransform:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        g = make_grid((32, 16), (3.0, 5.0))
        u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        np.testing.assert_allclose(
            inverse_transform(g, transform(g, u)), u, atol=1e-12
        )

    def test_parseval(self):
        rng = np.random.default_rng(12)
        g = make_grid((64,), (4.0,))
        u = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        phys = integrate(g, np.abs(u) ** 2)
        hat = transform(g, u)
        spec = float(np.sum(np.abs(hat) ** 2)) * g.mode_volume
        assert spec == pytest.approx(phys, rel=1e-12)

    def test_laplacian_symbol_applies_second_derivative(self):
        g = make_grid((64,), (math.pi,))
        u = np.exp(3j * g.axes[0])
        lap = inverse_transform(g, -laplacian_symbol(g) * transform(g, u))
        np.testing.assert_allclose(lap, -9.0 * u, atol=1e-10)


class TestBoundaryDensityRatio:
    def test_interior_gaussian_is_tiny(self):
        g = make_grid((128,), (8.0,))
        rho = np.exp(-(g.axes[0] ** 2))
        assert boundary_density_ratio(g, rho) < 1e-12

    def test_edge_hugging_gaussian_is_visible(self):
        g = make_grid((128,), (8.0,))
        rho = np.exp(-((g.axes[0] - 7.0) ** 2))
        assert boundary_density_ratio(g, rho) > 1e-3


class TestSpectralUpsample:
    def test_plane_wave_exact(self):
        g = make_grid((32,), (math.pi,))
        u = np.exp(3j * g.axes[0])
        gf, fine = spectral_upsample(g, u, 2)
        assert gf.points == (64,)
        np.testing.assert_allclose(fine, np.exp(3j * gf.axes[0]), atol=1e-12)

    def test_preserves_quadrature_mass(self):
        g = make_grid((64,), (6.0,))
        u = np.exp(-(g.axes[0] ** 2) / 2).astype(complex)
        gf, fine = spectral_upsample(g, u, 2)
        m0 = integrate(g, np.abs(u) ** 2)
        m1 = integrate(gf, np.abs(fine) ** 2)
        assert m1 == pytest.approx(m0, rel=1e-12)

    def test_rejects_bad_factor(self):
        g = make_grid((16,), (2.0,))
        with pytest.raises(ValueError):
            spectral_upsample(g, np.ones(16, complex), 3)


class TestGridObject:
    def test_frozen(self):
        g = make_grid((16,), (2.0,))
        with pytest.raises(AttributeError):
            g.dim = 2  # type: ignore[misc]

    def test_wavenumbers_shapes(self):
        g = make_grid((16, 8), (2.0, 2.0))
        assert g.wavenumbers[0].size == 16
        assert g.wavenumbers[1].size == 8
