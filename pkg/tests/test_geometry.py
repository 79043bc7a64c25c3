import json

import numpy as np
import pytest

from holeflow import geometry as ge
from holeflow.errors import GeometryError, ResolutionError
from holeflow.grids import FLUID, GUARD, HOLE, Grid, load_raw


def fit(epsilons, values):
    slope, _ = np.polyfit(np.log(epsilons), np.log(values), 1)
    return float(slope)


class TestScalingParams:
    def test_theory_flag(self):
        assert ge.ScalingParams(0.3, 3.5, 4.0).theory_regime
        assert not ge.ScalingParams(0.3, 2.0, 1.0).theory_regime
        assert not ge.ScalingParams(0.3, 3.0, 4.0).theory_regime  # boundary excluded

    def test_characteristic_numbers(self):
        sc = ge.ScalingParams(0.5, 3.2, 4.0)
        assert sc.mach == pytest.approx(0.5 ** 4)
        assert sc.froude == pytest.approx(0.5 ** 2)
        assert sc.guard_radius == pytest.approx(0.5 ** 3.2)
        assert sc.hole_radius == pytest.approx(0.9 * 0.5 ** 3.2)

    def test_validation(self):
        with pytest.raises(GeometryError):
            ge.ScalingParams(1.5, 3.2, 4.0)
        with pytest.raises(GeometryError):
            ge.ScalingParams(0.5, 3.2, 4.0, d=4)


class TestPlacement:
    def test_count_bound_example(self):
        sc = ge.ScalingParams(0.5, 3.2, 4.0, d=3)
        # (3/(4 pi)) (0.5^3.2 + 0.25)^{-3} = 5.17 -> floor 5
        assert ge.hole_count_bound(sc, 1.0) == 5

    def test_lattice_within_bound(self):
        sc = ge.ScalingParams(0.5, 3.2, 4.0, d=3)
        geom = ge.build_perforation(sc, 1.0)
        assert 0 < geom.N <= ge.hole_count_bound(sc, 1.0)

    def test_nothing_fits(self):
        sc = ge.ScalingParams(0.9, 1.1, 2.0, d=2)
        with pytest.raises(GeometryError):
            ge.build_perforation(sc, 1.0)

    def test_random_determinism(self):
        sc = ge.ScalingParams(0.25, 2.0, 3.0, d=2)
        a = ge.build_perforation(sc, 1.0, "random", seed=7)
        b = ge.build_perforation(sc, 1.0, "random", seed=7)
        c = ge.build_perforation(sc, 1.0, "random", seed=8)
        assert np.array_equal(a.centers, b.centers)
        assert not np.array_equal(a.centers, c.centers)

    @pytest.mark.parametrize("mode", ["lattice", "random"])
    def test_disjointness_and_containment(self, mode):
        sc = ge.ScalingParams(0.3, 2.0, 3.0, d=2)
        geom = ge.build_perforation(sc, 2.0, mode, seed=1)
        rD = geom.disjoint_radius
        for i in range(geom.N):
            assert np.all(geom.centers[i] - rD >= -1e-12)
            assert np.all(geom.centers[i] + rD <= 2.0 + 1e-12)
            for j in range(i + 1, geom.N):
                assert np.linalg.norm(geom.centers[i] - geom.centers[j]) \
                    >= 2.0 * rD - 1e-12

    def test_fixed_mode_checks(self):
        sc = ge.ScalingParams(0.5, 2.0, 3.0, d=2)
        geom = ge.build_perforation(sc, 1.0, "fixed", centers=(0.5, 0.5))
        assert geom.N == 1
        with pytest.raises(GeometryError):  # guard ball out of the box
            ge.build_perforation(sc, 1.0, "fixed", centers=(0.1, 0.5))
        with pytest.raises(GeometryError):  # padded balls overlap
            ge.build_perforation(ge.ScalingParams(0.2, 2.0, 3.0, d=2), 1.0, "fixed",
                                 centers=np.array([[0.4, 0.5], [0.45, 0.5]]))


class TestMeasures:
    def test_analytic_volume(self):
        sc = ge.ScalingParams(0.5, 3.2, 4.0, d=3)
        geom = ge.build_perforation(sc, 1.0)
        expect = geom.N * (4.0 * np.pi / 3.0) * (0.9 * 0.5 ** 3.2) ** 3
        assert ge.hole_measure(geom).analytic == pytest.approx(expect, rel=1e-12)

    def test_no_holes_zero_measure(self):
        sc = ge.ScalingParams(0.3, 2.0, 3.0, d=2)
        geom = ge.PerforatedGeometry(sc, 1.0, np.zeros((0, 2)))
        assert ge.hole_measure(geom).analytic == 0.0

    def test_bound_ratio_sweep(self):
        ratios = []
        for eps in (0.5, 0.35, 0.25):
            sc = ge.ScalingParams(eps, 3.2, 4.0, d=3)
            geom = ge.build_perforation(sc, 1.0)
            ratios.append(ge.hole_measure(geom).bound_ratio)
        assert max(ratios) / min(ratios) < 4.0

    def test_rasterization_first_order(self):
        sc = ge.ScalingParams(0.4, 1.5, 3.0, d=2)
        geom = ge.build_perforation(sc, 1.0)
        exact = geom.analytic_hole_volume()
        errs = []
        for n in (64, 128, 256, 512):
            m = ge.hole_measure(geom, Grid((n, n), 1.0 / n))
            errs.append(abs(m.rasterized - exact))
        # halving h should at least halve the error on average
        rate = fit([1.0 / n for n in (64, 128, 256, 512)], np.maximum(errs, 1e-12))
        assert rate >= 0.9


class TestCutoff:
    def geom(self):
        sc = ge.ScalingParams(0.4, 1.5, 3.0, d=2)
        return ge.build_perforation(sc, 1.0)

    def test_profile_values(self):
        geom = self.geom()
        r0, r1 = geom.hole_radius, geom.guard_radius
        assert ge.cutoff_profile(0.0, r0, r1) == 1.0
        assert ge.cutoff_profile(r0, r0, r1) == 1.0
        assert ge.cutoff_profile(r1, r0, r1) == 0.0

    def test_field_values(self):
        geom = self.geom()
        n = 512
        grid = Grid((n, n), 1.0 / n)
        g = ge.cutoff_g(geom, grid).data
        mask = geom.classify(grid)
        assert np.all(g[mask == HOLE] <= 1e-12)
        assert np.all(g[mask == FLUID] == 1.0)
        assert np.all((g >= 0.0) & (g <= 1.0))
        # radial midpoint of the annulus sits at g = 1/2
        mid = 0.5 * (geom.hole_radius + geom.guard_radius)
        assert ge.cutoff_profile(mid, geom.hole_radius, geom.guard_radius) \
            == pytest.approx(0.5, abs=1e-12)

    def test_resolution_error(self):
        geom = self.geom()
        with pytest.raises(ResolutionError) as err:
            ge.cutoff_g(geom, Grid((16, 16), 1.0 / 16))
        assert err.value.required_h > 0

    def test_reproducibility(self):
        geom = self.geom()
        grid = Grid((256, 256), 1.0 / 256)
        a = ge.cutoff_g(geom, grid).data
        b = ge.cutoff_g(ge.build_perforation(ge.ScalingParams(0.4, 1.5, 3.0, d=2), 1.0),
                        grid).data
        assert np.array_equal(a, b)


class TestCutoffNorms:
    def test_sup_norms(self):
        sc = ge.ScalingParams(0.5, 3.2, 4.0, d=3)
        geom = ge.build_perforation(sc, 1.0)
        n1, ng = ge.cutoff_norms(geom, float("inf"))
        assert n1 == 1.0
        assert ng == pytest.approx(1.875 / (0.1 * 0.5 ** 3.2), rel=1e-3)

    def test_gradient_scaling_matches_exponent(self):
        eps = [2.0 ** (-k) for k in range(1, 5)]
        alpha = 3.2
        grads = [ge.theory_cutoff_norms(e, alpha, 2.0, d=3)[1] for e in eps]
        target = 3.0 * (alpha - 1.0) / 2.0 - alpha
        assert abs(fit(eps, grads) - target) < 0.1

    def test_value_scaling_matches_exponent(self):
        eps = [2.0 ** (-k) for k in range(1, 5)]
        alpha = 3.2
        vals = [ge.theory_cutoff_norms(e, alpha, 2.0, d=3)[0] for e in eps]
        assert abs(fit(eps, vals) - 3.0 * (alpha - 1.0) / 2.0) < 0.1

    def test_sup_gradient_scaling(self):
        eps = [2.0 ** (-k) for k in range(1, 5)]
        vals = [ge.theory_cutoff_norms(e, 3.2, float("inf"), d=3)[1] for e in eps]
        assert abs(fit(eps, vals) + 3.2) < 0.1

    def test_single_hole_l1_gradient(self):
        eps = [2.0 ** (-k) for k in range(1, 5)]
        alpha = 3.2
        vals = [ge.single_hole_cutoff_norms(ge.ScalingParams(e, alpha, 4.0, d=3), 1.0)[1]
                for e in eps]
        assert abs(fit(eps, vals) - 2.0 * alpha) < 0.05


class TestExport:
    def test_json_and_mask_roundtrip(self, tmp_path):
        sc = ge.ScalingParams(0.3, 2.0, 3.0, d=2)
        geom = ge.build_perforation(sc, 2.0)
        geom.export_json(tmp_path / "geom.json")
        with open(tmp_path / "geom.json") as fh:
            payload = json.load(fh)
        assert payload["N"] == geom.N
        assert np.allclose(payload["centers"], geom.centers)

        grid = Grid((128, 128), 2.0 / 128)
        geom.export_mask(tmp_path / "mask.raw", grid)
        arr, spacing, origin = load_raw(tmp_path / "mask.raw")
        assert arr.dtype == np.uint8
        assert arr.shape == (128, 128)
        assert spacing == pytest.approx(grid.spacing)
        assert set(np.unique(arr)) <= {FLUID, HOLE, GUARD}
