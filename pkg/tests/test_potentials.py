"""Potential families, the well quadratures H_i, and the landscape analyzer."""

import numpy as np
import pytest

import fracsp as f

from conftest import S


class TestSingleWell:
    def test_zero_at_well(self):
        pot = f.make_single_well((1.0, -0.5, 0.0), 2.0, 1.0)
        assert pot(1.0, -0.5, 0.0) == 0.0

    def test_local_model_ratio(self):
        # V(x0+z) / (V_inf |z|^r) = 1/(1+|z|^r) -> 1 as |z| -> 0
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 3.0)
        for rad in (0.5, 0.25, 0.125):
            ratio = pot(rad, 0.0, 0.0) / (3.0 * rad**2)
            assert ratio == pytest.approx(1.0 / (1.0 + rad**2), rel=1e-12)

    def test_monotone_approach_to_model(self):
        # checked at radii {4h, 2h, h} of the reference spacing h = 0.5:
        # ratios approach 1 monotonically, landing within 20%
        h = 0.5
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        ratios = [pot(k * h, 0.0, 0.0) / (k * h) ** 2 for k in (4, 2, 1)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        assert abs(ratios[-1] - 1.0) <= 0.2 + 1e-12

    def test_bounded_by_sup_with_corner_approach(self, grid32):
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        table = pot.table(grid32)
        assert table.min() == 0.0
        assert table.max() <= 1.0
        corner = pot(-grid32.L, -grid32.L, -grid32.L)
        assert corner > 0.95  # sup approached on the boundary ring

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            f.make_single_well((0, 0, 0), -1.0, 1.0)
        with pytest.raises(ValueError):
            f.make_single_well((0, 0, 0), 2.0, 0.0)


class TestMultiWell:
    def test_one_well_reduces_to_single(self, grid32):
        pot1 = f.make_single_well((0.5, 0.0, 0.0), 2.0, 1.0)
        pot2 = f.make_multi_well([((0.5, 0.0, 0.0), 2.0)], 1.0)
        assert np.allclose(pot1.table(grid32), pot2.table(grid32), rtol=1e-14)

    def test_degree_bookkeeping(self):
        pot = f.make_multi_well([((-2, 0, 0), 2.0), ((2, 0, 0), 4.0)], 1.0)
        assert max(w.degree for w in pot.wells) == 4.0

    def test_local_coefficient_product_formula(self):
        pot = f.make_multi_well([((-2, 0, 0), 2.0), ((2, 0, 0), 4.0)], 1.0)
        assert pot.wells[0].coeff == pytest.approx(4.0**4)
        assert pot.wells[1].coeff == pytest.approx(4.0**2)

    def test_local_coefficient_against_loglog_fit(self):
        pot = f.make_multi_well([((-2, 0, 0), 2.0), ((2, 0, 0), 4.0)], 1.0)
        for j, well in enumerate(pot.wells):
            radii = np.array([1e-3, 2e-3, 3e-3])
            vals = np.array([pot(well.center[0] + r, well.center[1], well.center[2])
                             for r in radii])
            slope, _ = np.polyfit(np.log(radii), np.log(vals), 1)
            assert slope == pytest.approx(well.degree, rel=0.01)
            # intercept at the declared degree (free-slope fits trade slope
            # error against intercept error over a narrow window)
            c_fit = np.exp(np.mean(np.log(vals) - well.degree * np.log(radii)))
            assert c_fit == pytest.approx(well.coeff, rel=0.01)

    def test_overlapping_wells_rejected(self):
        with pytest.raises(ValueError, match="overlapping"):
            f.make_multi_well([((0, 0, 0), 2.0), ((0, 0, 0), 4.0)], 1.0)

    def test_boundary_margin_enforced(self):
        with pytest.raises(ValueError, match="too close to boundary"):
            f.make_multi_well([((7.0, 0, 0), 2.0)], 1.0, L=8.0)
        f.make_multi_well([((5.9, 0, 0), 2.0)], 1.0, L=8.0)  # inside margin


class TestComputeH:
    def test_quadratic_closed_form(self, q32):
        # H(y) = H(0) + c a* |y|^2 for the quadratic local model and radial Q
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.3)
        h0 = f.compute_H(pot, 0, (0, 0, 0), q32.Q, q32.a_star)
        for y in [(0.75, 0, 0), (0.75, -0.75, 0.75), (1.5, 0.75, 0)]:
            hy = f.compute_H(pot, 0, y, q32.Q, q32.a_star)
            expected = h0 + 1.3 * q32.a_star * float(np.sum(np.square(y)))
            assert hy == pytest.approx(expected, rel=1e-5)

    def test_even_symmetry(self, q32):
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        y = (0.75, 0.75, 0.0)
        hp = f.compute_H(pot, 0, y, q32.Q, q32.a_star)
        hm = f.compute_H(pot, 0, tuple(-v for v in y), q32.Q, q32.a_star)
        assert hm == pytest.approx(hp, rel=1e-5)

    def test_origin_is_minimum(self, q32):
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        h0 = f.compute_H(pot, 0, (0, 0, 0), q32.Q, q32.a_star)
        for y in [(0.75, 0, 0), (0, 1.5, 0), (0.75, 0.75, 0.75)]:
            assert f.compute_H(pot, 0, y, q32.Q, q32.a_star) > h0

    def test_large_offset_rejected(self, q32):
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        with pytest.raises(ValueError, match="offset"):
            f.compute_H(pot, 0, (q32.Q.grid.L / 2, 0, 0), q32.Q, q32.a_star)

    def test_mass_mismatch_rejected(self, q32):
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        with pytest.raises(ValueError, match="normalized"):
            f.compute_H(pot, 0, (0, 0, 0), q32.Q, 2 * q32.a_star)


class TestLandscape:
    def test_single_quadratic_well(self, q32):
        c = 1.3
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, c)
        rep = f.analyze_landscape(pot, q32.Q, q32.a_star)
        assert rep.r == 2.0
        assert rep.Zbar == (0,) and rep.Z0 == (0,)
        m = rep.minima[0]
        assert np.max(np.abs(m.y0)) < q32.Q.grid.h / 4
        expected = 2.0 * c * q32.a_star * np.eye(3)
        assert np.max(np.abs(m.hessian - expected)) < 0.05 * 2 * c * q32.a_star
        assert rep.nondegenerate
        assert rep.satisfies_v3()

    def test_two_wells_max_degree_selected(self, q32):
        pot = f.make_multi_well([((-2.25, 0, 0), 2.0), ((2.25, 0, 0), 4.0)], 1.0)
        rep = f.analyze_landscape(pot, q32.Q, q32.a_star)
        assert rep.r == 4.0
        assert rep.Zbar == (1,)
        assert set(rep.Z0) <= set(rep.Zbar)

    def test_symmetric_double_well_ties(self, q32):
        pot = f.make_multi_well([((-2.25, 0, 0), 2.0), ((2.25, 0, 0), 2.0)], 1.0)
        rep = f.analyze_landscape(pot, q32.Q, q32.a_star)
        lam = [rep.lambda_bar[i] for i in rep.Zbar]
        assert lam[0] == pytest.approx(lam[1], rel=1e-9)
        assert len(rep.Z0) == 2
        assert not rep.satisfies_v3()

    def test_translation_covariance(self, q32):
        # shifting Q shifts the argmin by the same grid offset
        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        rep0 = f.analyze_landscape(pot, q32.Q, q32.a_star)
        d = 2 * q32.Q.grid.h
        shifted = f.shift(q32.Q, (2, 0, 0))
        rep1 = f.analyze_landscape(pot, shifted, q32.a_star)
        delta = rep1.minima[0].y0 - rep0.minima[0].y0
        assert delta[0] == pytest.approx(-d, abs=q32.Q.grid.h / 8)
        assert abs(delta[1]) < q32.Q.grid.h / 8 and abs(delta[2]) < q32.Q.grid.h / 8

    def test_requires_wells(self, q32):
        with pytest.raises(ValueError, match="wells"):
            f.analyze_landscape(f.make_zero(), q32.Q, q32.a_star)

    def test_report_serializes(self, q32):
        import json

        from fracsp.potentials import landscape_to_dict

        pot = f.make_single_well((0.0, 0.0, 0.0), 2.0, 1.0)
        rep = f.analyze_landscape(pot, q32.Q, q32.a_star)
        payload = json.dumps(landscape_to_dict(rep))
        assert "lambda_bar_0" in payload


class TestBuiltinInvariants:
    @pytest.mark.parametrize("maker", [
        lambda: f.make_single_well((0, 0, 0), 2.0, 1.0),
        lambda: f.make_single_well((1.5, 0, 0), 1.0, 0.5),
        lambda: f.make_multi_well([((-2.25, 0, 0), 2.0), ((2.25, 0, 0), 4.0)], 1.0),
    ])
    def test_bounds_on_grid(self, grid32, maker):
        pot = maker()
        table = pot.table(grid32)
        assert table.min() >= 0.0
        assert table.max() <= pot.V_inf
        # boundary ring within 5% of the supremum for these scales
        ring = min(table[0, :, :].min(), table[:, 0, :].min(), table[:, :, 0].min())
        assert ring > 0.8 * pot.V_inf
