"""Grid construction, norms, shifts, and transform identities."""

import numpy as np
import pytest

import fracsp as f

from conftest import smooth_random_field


class TestMakeGrid:
    def test_spacing_and_coordinates(self):
        g = f.make_grid(8, 4.0)
        assert g.h == 1.0
        assert np.array_equal(g.x1, np.arange(-4.0, 4.0))

    def test_max_wavenumber_per_axis(self):
        g = f.make_grid(8, 4.0)
        # (pi/L) * (n/2) at the Nyquist index
        assert np.max(np.abs(g.k1)) == pytest.approx(np.pi)

    def test_odd_n_rejected(self):
        with pytest.raises(ValueError, match="n must be even"):
            f.make_grid(7, 4.0)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            f.make_grid(6, 4.0)

    def test_nonpositive_L_rejected(self):
        with pytest.raises(ValueError, match="L must be positive"):
            f.make_grid(8, 0.0)


class TestNorms:
    def test_constant_field_mass_is_box_volume(self):
        g = f.make_grid(8, 4.0)
        u = f.Field(g, np.ones(g.shape))
        assert f.norm_l2sq(u) == pytest.approx(512.0, rel=1e-14)

    def test_zero_field(self):
        g = f.make_grid(8, 4.0)
        assert f.norm_l2sq(f.Field(g, np.zeros(g.shape))) == 0.0

    def test_single_mode_via_plancherel(self):
        # integral of cos^2(k1 x) over the box is half the box volume
        g = f.make_grid(8, 4.0)
        x = g.x1
        u = f.Field(g, np.broadcast_to(np.cos(np.pi / 4 * x)[:, None, None],
                                       g.shape).copy())
        expected = 0.5 * (2 * g.L) ** 3
        assert f.norm_l2sq(u) == pytest.approx(expected, rel=1e-13)
        assert f.spectral_l2sq(g, f.to_spectral(u)) == pytest.approx(expected, rel=1e-12)

    def test_lp_constant_fields(self):
        g = f.make_grid(8, 4.0)
        one = f.Field(g, np.ones(g.shape))
        two = f.Field(g, 2.0 * np.ones(g.shape))
        assert f.norm_lp(one, 2) == pytest.approx(np.sqrt(512.0), rel=1e-14)
        assert f.norm_lp(two, 3) == pytest.approx((8 * 512.0) ** (1 / 3), rel=1e-14)

    def test_lp_gaussian_against_closed_form(self):
        # int exp(-q |x|^2) dx = (pi/q)^{3/2}
        g = f.make_grid(64, 8.0)
        u = f.Field(g, np.exp(-g.radius_sq()))
        for q in (1.5, 2.0, 3.0):
            exact = (np.pi / q) ** 1.5
            assert f.norm_lp(u, q) == pytest.approx(exact ** (1 / q), rel=1e-6)

    def test_lp_requires_q_at_least_one(self):
        g = f.make_grid(8, 4.0)
        with pytest.raises(ValueError):
            f.norm_lp(f.Field(g, np.ones(g.shape)), 0.5)


class TestShift:
    def test_zero_shift_identity(self, grid16, rng):
        u = smooth_random_field(grid16, rng)
        assert np.array_equal(f.shift(u, (0, 0, 0)).values, u.values)

    def test_shift_inverse(self, grid16, rng):
        u = smooth_random_field(grid16, rng)
        v = f.shift(f.shift(u, (3, -2, 5)), (-3, 2, -5))
        assert np.array_equal(v.values, u.values)

    def test_shift_is_sample_permutation(self, grid16, rng):
        u = smooth_random_field(grid16, rng)
        v = f.shift(u, (1, 7, -4))
        assert np.array_equal(np.sort(v.values.ravel()), np.sort(u.values.ravel()))

    @pytest.mark.parametrize("q", [2.0, 2.5, 12.0 / (3 + 2 * 0.9)])
    def test_shift_lq_isometry(self, grid16, rng, q):
        u = smooth_random_field(grid16, rng)
        v = f.shift(u, (2, 3, 4))
        assert f.norm_lp(v, q) == pytest.approx(f.norm_lp(u, q), rel=1e-14)


class TestSpectral:
    def test_roundtrip(self, grid16, rng):
        u = smooth_random_field(grid16, rng)
        v = f.from_spectral(grid16, f.to_spectral(u))
        assert np.max(np.abs(v.values - u.values)) < 1e-12 * np.max(np.abs(u.values))

    def test_delta_has_flat_spectrum(self, grid16):
        vals = np.zeros(grid16.shape)
        vals[3, 5, 7] = 1.0
        coeffs = f.to_spectral(f.Field(grid16, vals))
        mags = np.abs(coeffs)
        assert np.max(mags) == pytest.approx(np.min(mags), rel=1e-12)
        assert np.max(mags) == pytest.approx(grid16.cell_volume, rel=1e-12)

    def test_plancherel_on_random_fields(self, grid16):
        rng = np.random.default_rng(7)
        for _ in range(100):
            u = smooth_random_field(grid16, rng)
            m = f.norm_l2sq(u)
            assert abs(m - f.spectral_l2sq(grid16, f.to_spectral(u))) < 1e-12 * m


class TestField:
    def test_rejects_nonfinite(self, grid16):
        vals = np.zeros(grid16.shape)
        vals[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            f.Field(grid16, vals)

    def test_rejects_shape_mismatch(self, grid16):
        with pytest.raises(ValueError, match="shape"):
            f.Field(grid16, np.zeros((4, 4, 4)))

    def test_values_immutable(self, grid16):
        u = f.Field(grid16, np.zeros(grid16.shape))
        with pytest.raises(ValueError):
            u.values[0, 0, 0] = 1.0

    def test_max_location_tie_breaks_lowest_linear_index(self, grid16):
        vals = np.zeros(grid16.shape)
        vals[2, 2, 2] = 1.0
        vals[9, 9, 9] = 1.0
        _, idx = f.Field(grid16, vals).max_location()
        assert idx == (2, 2, 2)


class TestFieldIO:
    def test_dump_load_roundtrip(self, grid16, rng, tmp_path):
        u = smooth_random_field(grid16, rng)
        f.dump_field(u, tmp_path / "field")
        v = f.load_field(tmp_path / "field")
        assert np.array_equal(v.values, u.values)
        assert v.grid.n == grid16.n and v.grid.L == grid16.L

    def test_sidecar_contract(self, grid16, tmp_path):
        import json

        u = f.Field(grid16, np.ones(grid16.shape))
        _, sidecar = f.dump_field(u, tmp_path / "field")
        meta = json.loads(sidecar.read_text())
        assert meta == {"n": 16, "L": 8.0, "order": "row-major-x-fastest",
                        "dtype": "f64le"}

    def test_dump_is_x_fastest(self, tmp_path):
        g = f.make_grid(8, 4.0)
        x, _, _ = g.coords()
        u = f.Field(g, np.broadcast_to(x, g.shape).copy())
        raw, _ = f.dump_field(u, tmp_path / "field")
        flat = np.frombuffer(raw.read_bytes(), dtype="<f8")
        # first 8 samples sweep x at fixed (y, z)
        assert np.array_equal(flat[:8], g.x1)
