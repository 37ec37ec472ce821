"""
Tests for the finite-difference mode solver and the power pairing
"""

import warnings

import numpy as np
import pytest

from taperlink.analytic import fiber_he11_neff, slab_te_neff
from taperlink.errors import AmbiguousMatchWarning, GridMismatchError, NoGuidedModeError, SolverError
from taperlink.geometry import CouplerGeometry, GuideSelector, MaterialSet, build_cross_section, build_slab_section
from taperlink.io_utils import read_columns
from taperlink.modesolver import (
    ModeField,
    anticrossings,
    cross_power,
    fundamental_te,
    mode_overlap,
    mode_power,
    normalize,
    power_fraction,
    projection,
    solve_modes,
    solve_widths,
    superpose,
    sweep_width,
    track_branches,
    write_field_csv,
    write_sweep_csv,
)


@pytest.fixture(scope="module")
def materials():
    return MaterialSet()


@pytest.fixture(scope="module")
def coupled_modes(materials):
    """Coupled design point on the coarsest admissible grid"""
    cs = build_cross_section(CouplerGeometry(), materials, 20.0, GuideSelector.COUPLED)
    return solve_modes(cs, n_modes=4)


class TestPowerPairing:
    """Test suite for normalization, overlap and projection"""

    def test_normalize_unit_power(self, spot):
        """Test that normalized modes carry unit power"""
        assert mode_power(spot(320, 240, 2.0)) == pytest.approx(1.0)

    def test_normalize_scale_invariant(self, spot):
        """Test that normalization removes scale and phase"""
        mode = spot(320, 240, 2.0)
        again = normalize(mode.scaled(-3.7j))
        np.testing.assert_allclose(again.hy, mode.hy, atol=1e-12)

    def test_normalize_rejects_zero_field(self, spot):
        """Test that a field without power cannot be normalized"""
        with pytest.raises(SolverError):
            normalize(spot(320, 240, 2.0).scaled(0.0))

    def test_self_overlap(self, spot):
        """Test that a mode overlaps itself completely"""
        assert mode_overlap(spot(320, 240, 2.0), spot(320, 240, 2.0)) == pytest.approx(1.0)

    def test_overlap_symmetric_and_bounded(self, spot):
        """Test overlap symmetry and range"""
        a, b = spot(300, 240, 2.0), spot(340, 260, 1.9)
        assert mode_overlap(a, b) == pytest.approx(mode_overlap(b, a))
        assert 0.0 < mode_overlap(a, b) < 1.0

    def test_distant_spots_orthogonal(self, spot):
        """Test that well separated fields do not overlap"""
        assert mode_overlap(spot(160, 240, 2.0), spot(480, 240, 1.5)) < 1e-12

    def test_polarizations_orthogonal(self, spot):
        """Test that crossed polarizations do not overlap"""
        assert mode_overlap(spot(320, 240, 2.0), spot(320, 240, 2.0, te=False)) == pytest.approx(0.0, abs=1e-15)

    def test_grid_mismatch(self, spot):
        """Test that fields on different grids cannot be compared"""
        a = spot(320, 240, 2.0)
        b = ModeField(a.ex[:-1], a.ey[:-1], a.hx[:-1], a.hy[:-1], a.dx, a.dy, a.wavelength)
        with pytest.raises(GridMismatchError):
            mode_overlap(a, b)

    def test_projection_recovers_amplitudes(self, spot):
        """Test that projections invert a superposition of orthogonal modes"""
        a, b = spot(160, 240, 2.0), spot(480, 240, 1.5)
        field = superpose([a, b], [0.6, 0.8j])
        assert projection(field, a) == pytest.approx(0.6, abs=1e-6)
        assert projection(field, b) == pytest.approx(0.8j, abs=1e-6)
        assert mode_power(field) == pytest.approx(1.0, abs=1e-6)

    def test_power_fraction(self, spot):
        """Test power bookkeeping inside a mask"""
        mode = spot(160, 240, 2.0)
        left = np.zeros(mode.hy.shape, dtype=bool)
        left[:32, :] = True
        assert power_fraction(mode, left) == pytest.approx(1.0, abs=1e-6)
        assert power_fraction(mode, ~left) == pytest.approx(0.0, abs=1e-6)

    def test_fundamental_te(self, spot):
        """Test selection of the highest TE-like mode"""
        modes = [spot(320, 240, 2.5, te=False), spot(320, 240, 2.2), spot(160, 240, 1.3)]
        assert fundamental_te(modes).n_eff == pytest.approx(2.2)
        with pytest.raises(NoGuidedModeError):
            fundamental_te([spot(320, 240, 2.5, te=False)])


class TestBranchTracking:
    """Test suite for field-identity branch tracking"""

    def test_follows_field_through_crossing(self, spot):
        """Test that branches follow the field, not the index order"""
        a = [spot(160, 240, n) for n in (2.0, 1.95, 1.85)]
        b = [spot(480, 240, n) for n in (1.9, 1.92, 1.95)]
        per_point = [sorted([x, y], key=lambda m: -m.n_eff) for x, y in zip(a, b)]
        branches = track_branches(per_point, [100.0, 150.0, 200.0])
        assert len(branches) == 2
        by_start = {round(float(br.n_eff[0]), 3): br for br in branches}
        np.testing.assert_allclose(by_start[2.0].n_eff, [2.0, 1.95, 1.85])
        np.testing.assert_allclose(by_start[1.9].n_eff, [1.9, 1.92, 1.95])

    def test_new_branch_for_unmatched_mode(self, spot):
        """Test that a mode without a continuous predecessor starts a branch"""
        per_point = [[spot(160, 240, 2.0)], [spot(160, 240, 1.9), spot(480, 240, 1.5)]]
        branches = track_branches(per_point, [100.0, 200.0])
        assert len(branches) == 2
        assert len(branches[1]) == 1
        assert branches[1].parameter[0] == 200.0

    def test_ambiguous_match_warns(self, spot):
        """Test that near-equal overlaps are flagged"""
        first = spot(320, 240, 2.0)
        per_point = [[first], [spot(300, 240, 1.99), spot(340, 240, 1.98)]]
        with pytest.warns(AmbiguousMatchWarning):
            branches = track_branches(per_point, [100.0, 110.0])
        assert branches[0].n_eff[1] == pytest.approx(1.99)

    def test_non_monotone_parameter(self, spot):
        """Test that the sweep parameter must be monotone"""
        modes = [spot(320, 240, 2.0)]
        with pytest.raises(SolverError):
            track_branches([modes, modes, modes], [100.0, 200.0, 150.0])


class TestAnticrossings:
    """Test suite for gap minima"""

    def test_single_minimum(self):
        """Test detection of one interior gap minimum"""
        w = np.linspace(50, 350, 31)
        upper = 1.5 + 0.002 * (w - 50) + np.sqrt(0.0004 + (0.001 * (w - 170)) ** 2)
        lower = 1.5 + 0.002 * (w - 50) - np.sqrt(0.0004 + (0.001 * (w - 170)) ** 2)
        assert anticrossings(w, upper, lower) == [170.0]

    def test_monotone_gap(self):
        """Test that a monotone gap has no anticrossing"""
        w = np.linspace(50, 350, 7)
        assert anticrossings(w, 2.0 + 0.001 * w, np.full(7, 1.3)) == []


class TestSolveModes:
    """Test suite for the eigenmode solver"""

    def test_slab_oracle(self, materials):
        """Test the slab TE index against the transcendental root"""
        cs = build_slab_section(160.0, materials, resolution=1.0)
        te = fundamental_te(solve_modes(cs, n_modes=2, n_eff_guess=3.0))
        assert te.n_eff == pytest.approx(slab_te_neff(160.0, 3.46, 1.0, 940.0), abs=5e-4)

    def test_residuals(self, coupled_modes):
        """Test that every returned eigenpair is converged"""
        assert all(m.residual < 1e-8 for m in coupled_modes)

    def test_sorted_and_bounded(self, coupled_modes):
        """Test ordering and the guided range"""
        n = [m.n_eff for m in coupled_modes]
        assert n == sorted(n, reverse=True)
        assert all(1.0 < x < 3.46 for x in n)

    def test_orthogonality(self, coupled_modes):
        """Test that distinct modes are power-orthogonal"""
        for i, a in enumerate(coupled_modes):
            assert mode_power(a) == pytest.approx(1.0, abs=1e-9)
            for b in coupled_modes[i + 1:]:
                assert abs(cross_power(a, b)) < 1e-5

    def test_decayed(self, coupled_modes):
        """Test that the padded domain contains the waveguide mode"""
        assert fundamental_te(coupled_modes).domain_ok

    def test_deterministic(self, materials, coupled_modes):
        """Test that repeated solves are bitwise identical"""
        cs = build_cross_section(CouplerGeometry(), materials, 20.0, GuideSelector.COUPLED)
        again = solve_modes(cs, n_modes=4)
        for a, b in zip(coupled_modes, again):
            assert a.n_eff == b.n_eff
            np.testing.assert_array_equal(a.hy, b.hy)

    def test_guess_outside_range(self, materials):
        """Test that a shift outside the guided range is rejected"""
        cs = build_slab_section(160.0, materials, resolution=2.0)
        with pytest.raises(SolverError):
            solve_modes(cs, n_eff_guess=0.9)

    def test_invalid_mode_count(self, materials):
        """Test that at least one mode must be requested"""
        cs = build_slab_section(160.0, materials, resolution=2.0)
        with pytest.raises(SolverError):
            solve_modes(cs, n_modes=0)


class TestExports:
    """Test suite for CSV output"""

    def test_field_csv(self, tmp_path, spot):
        """Test one grid file per transverse component"""
        paths = write_field_csv(tmp_path, spot(320, 240, 2.0), prefix="m0")
        assert [p.name for p in paths] == ["m0_ex.csv", "m0_ey.csv", "m0_hx.csv", "m0_hy.csv"]
        rows = paths[0].read_text().splitlines()
        assert len(rows) == 48
        assert len(rows[0].split(",")) == 64

    def test_sweep_csv(self, tmp_path, spot):
        """Test the sweep table layout"""
        per_point = [[spot(160, 240, 2.0)], [spot(160, 240, 1.9)]]
        path = write_sweep_csv(tmp_path / "sweep.csv", track_branches(per_point, [100.0, 200.0]))
        cols = read_columns(path, ("width_nm", "branch_id", "n_eff", "te_fraction"))
        np.testing.assert_allclose(cols["n_eff"], [2.0, 1.9])
        np.testing.assert_allclose(cols["te_fraction"], [1.0, 1.0])


@pytest.mark.slow
class TestAcceptance:
    """Full-resolution physics runs"""

    def test_fiber_oracle(self, materials):
        """Test the microfiber HE11 index against the exact root"""
        cs = build_cross_section(CouplerGeometry(), materials, 10.0, GuideSelector.FIBER)
        modes = solve_modes(cs, n_modes=2, n_eff_guess=1.4)
        assert modes[0].n_eff == pytest.approx(fiber_he11_neff(1000.0, 1.45, 1.0, 940.0), abs=2e-3)

    def test_coupled_index_above_two(self, materials):
        """Test that the coupled design point guides above n_eff = 2"""
        cs = build_cross_section(CouplerGeometry(), materials, 10.0, GuideSelector.COUPLED)
        assert solve_modes(cs, n_modes=2)[0].n_eff > 2.0

    def test_dispersion_topology(self, materials):
        """Test one anticrossing between 140 and 200 nm and the fiber-like mode at 50 nm"""
        geom = CouplerGeometry()
        widths = np.linspace(50, 350, 15)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AmbiguousMatchWarning)
            coupled = sweep_width(widths, geom, materials, GuideSelector.COUPLED, n_modes=6,
                                  n_eff_guess=1.45, keep_modes=True)
        bare_wg = sweep_width([300.0], geom, materials, GuideSelector.WAVEGUIDE, n_modes=2)
        assert max(b.n_eff[0] for b in bare_wg) > 2.0

        upper, lower = [], []
        for w in widths:
            te = sorted((float(b.n_eff[list(b.parameter).index(w)]) for b in coupled
                         if w in b.parameter and b.te_fraction[list(b.parameter).index(w)] > 0.5), reverse=True)
            upper.append(te[0])
            lower.append(te[1])
        crossings = [w for w in anticrossings(widths, upper, lower) if 140 <= w <= 200]
        assert len(crossings) == 1

        fiber = build_cross_section(geom.with_width(50.0), materials, 50.0 / 8, GuideSelector.FIBER)
        bare_fiber = solve_modes(fiber, n_modes=2, n_eff_guess=1.4)
        first = [b for b in coupled if b.parameter[0] == 50.0]
        top = max(first, key=lambda b: b.n_eff[0]).modes[0]
        assert max(mode_overlap(top, f) for f in bare_fiber) > 0.8

    def test_tip_overlap(self, materials):
        """Test that the coupled fundamental at the tip matches the bare fiber mode"""
        geom = CouplerGeometry(wg_width=140.0)
        coupled = solve_modes(build_cross_section(geom, materials, 10.0, GuideSelector.COUPLED),
                              n_modes=4, n_eff_guess=1.45)
        fiber = solve_modes(build_cross_section(geom, materials, 10.0, GuideSelector.FIBER),
                            n_modes=2, n_eff_guess=1.4)
        assert mode_overlap(fundamental_te(coupled), fundamental_te(fiber)) >= 0.9

    def test_fiber_sweep_constant(self, materials):
        """Test that the bare-fiber index does not depend on the waveguide width"""
        branches = sweep_width(np.linspace(100, 400, 4), CouplerGeometry(), materials, GuideSelector.FIBER,
                               n_modes=2, n_eff_guess=1.4)
        for branch in branches:
            assert np.ptp(branch.n_eff) <= 1e-9

    def test_waveguide_index_grows_with_width(self, materials):
        """Test that the bare-waveguide TE index increases monotonically with width"""
        widths = np.linspace(150, 350, 5)
        per_width = solve_widths(widths, CouplerGeometry(), materials, GuideSelector.WAVEGUIDE, n_modes=2)
        n_eff = [fundamental_te(modes).n_eff for modes in per_width]
        assert np.all(np.diff(n_eff) > 0)

    def test_grid_refinement(self, materials):
        """Test that halving the grid spacing moves the waveguide index by less than 5e-3"""
        geom = CouplerGeometry()
        n_eff = []
        for resolution in (10.0, 5.0):
            cs = build_cross_section(geom, materials, resolution, GuideSelector.WAVEGUIDE, padding=600.0)
            n_eff.append(fundamental_te(solve_modes(cs, n_modes=2)).n_eff)
        assert abs(n_eff[0] - n_eff[1]) < 5e-3
