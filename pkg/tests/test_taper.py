"""
Tests for taper synthesis and adiabaticity certification
"""

import numpy as np
import pytest

from taperlink.errors import CoverageError, DispersionGapError, TaperError
from taperlink.taper import (
    TaperDispersion,
    TaperProfile,
    adiabaticity_margin,
    alpha_for_length,
    beat_length,
    design_taper,
    dispersion_table,
    linear_profile,
    read_dispersion_csv,
    read_profile_csv,
    two_mode_power,
    write_dispersion_csv,
    write_profile_csv,
)

DNDW = 0.002
GAP = 0.05
K0 = 2 * np.pi / 0.94


@pytest.fixture
def dispersion():
    """Linear bare-waveguide index with a constant supermode gap"""
    widths = np.linspace(100, 400, 31)
    n_wg = 1.8 + DNDW * (widths - 100)
    return TaperDispersion(widths, n_wg, n_wg + GAP / 2, n_wg - GAP / 2, 940.0)


class TestDesignTaper:
    """Test suite for profile synthesis"""

    def test_length_closed_form(self, dispersion):
        """Test the taper length for a constant integrand"""
        profile = design_taper(dispersion, 300, 140, alpha=0.1)
        expected = 160 * DNDW / (0.1 * K0 * GAP ** 2)
        assert profile.length == pytest.approx(expected, rel=1e-9)
        assert profile.w_start == 300
        assert profile.w_tip == 140

    def test_margin_equals_alpha(self, dispersion):
        """Test that the synthesized profile certifies at its own alpha"""
        profile = design_taper(dispersion, 300, 140, alpha=0.1)
        report = adiabaticity_margin(profile, dispersion)
        assert report.max_ratio == pytest.approx(0.1, rel=0.02)
        np.testing.assert_allclose(report.ratio, 0.1, rtol=0.02)
        assert report.certified(0.1 * 1.02)

    def test_length_scales_inverse_alpha(self, dispersion):
        """Test that halving alpha doubles the length"""
        a = design_taper(dispersion, 300, 140, alpha=0.2)
        b = design_taper(dispersion, 300, 140, alpha=0.1)
        assert b.length == pytest.approx(2 * a.length, rel=1e-9)

    def test_alpha_for_length(self, dispersion):
        """Test the alpha that yields a 30 um taper"""
        alpha = alpha_for_length(dispersion, 300, 140, 30.0)
        assert design_taper(dispersion, 300, 140, alpha=alpha).length == pytest.approx(30.0, rel=1e-6)

    @pytest.mark.parametrize("length", [25.0, 60.0, 250.0])
    def test_alpha_for_length_matches_root(self, dispersion, length):
        """Test the closed-form alpha against a root of the synthesized length"""
        alpha = alpha_for_length(dispersion, 300, 140, length)
        assert design_taper(dispersion, 300, 140, alpha=alpha).length == pytest.approx(length, rel=1e-9)

    def test_alpha_for_length_disagreement(self, dispersion, monkeypatch):
        """Test that a root-finding result off the closed form is reported"""
        monkeypatch.setattr("taperlink.taper.brentq", lambda f, a, b, **kw: 0.99 * 2.0 * a)
        with pytest.raises(TaperError, match="disagree"):
            alpha_for_length(dispersion, 300, 140, 30.0)

    def test_unreachable_length(self, dispersion):
        """Test that a length needing alpha >= 1 is rejected"""
        with pytest.raises(TaperError):
            alpha_for_length(dispersion, 300, 140, 1.0)

    def test_invalid_alpha(self, dispersion):
        """Test the alpha range"""
        for alpha in (0.0, 1.0, -0.1):
            with pytest.raises(TaperError):
                design_taper(dispersion, 300, 140, alpha=alpha)

    def test_tip_above_start(self, dispersion):
        """Test that the taper must narrow"""
        with pytest.raises(TaperError):
            design_taper(dispersion, 140, 300)

    def test_coverage(self, dispersion):
        """Test that the table must span the taper widths"""
        with pytest.raises(CoverageError):
            design_taper(dispersion, 300, 50)

    def test_closed_gap(self):
        """Test that a vanishing supermode gap is reported with its width"""
        widths = np.linspace(100, 400, 31)
        n_wg = 1.8 + DNDW * (widths - 100)
        gap = np.abs(widths - 200) * 1e-4
        table = TaperDispersion(widths, n_wg, n_wg + gap / 2, n_wg - gap / 2, 940.0)
        with pytest.raises(DispersionGapError) as exc:
            design_taper(table, 300, 140)
        assert exc.value.width_nm == pytest.approx(200.0)

    def test_non_monotone_index(self):
        """Test that a non-monotone bare index is rejected"""
        widths = np.linspace(100, 400, 31)
        n_wg = 2.0 + 1e-5 * (widths - 250) ** 2
        table = TaperDispersion(widths, n_wg, n_wg + GAP / 2, n_wg - GAP / 2, 940.0)
        with pytest.raises(TaperError):
            design_taper(table, 300, 140)


class TestAdiabaticity:
    """Test suite for the adiabaticity margin"""

    def test_linear_profile(self, dispersion):
        """Test the ratio of a straight taper"""
        report = adiabaticity_margin(linear_profile(300, 140, 100.0), dispersion)
        expected = DNDW * 1.6 / (K0 * GAP ** 2)
        assert report.max_ratio == pytest.approx(expected, rel=1e-6)
        assert not report.certified(0.1)

    def test_single_point_profile(self, dispersion):
        """Test that a zero-length profile cannot be certified"""
        with pytest.raises(CoverageError):
            adiabaticity_margin(TaperProfile([0.0], [200.0]), dispersion)

    def test_profile_outside_table(self, dispersion):
        """Test coverage of the profile widths"""
        with pytest.raises(CoverageError):
            adiabaticity_margin(linear_profile(300, 60, 50.0), dispersion)

    def test_reversed_profile(self, dispersion):
        """Test that direction does not change the ratio"""
        profile = design_taper(dispersion, 300, 140, alpha=0.1)
        report = adiabaticity_margin(profile.reversed(), dispersion)
        assert report.max_ratio == pytest.approx(0.1, rel=0.02)


class TestProfile:
    """Test suite for the TaperProfile container"""

    def test_must_start_at_zero(self):
        """Test the origin of the position axis"""
        with pytest.raises(TaperError):
            TaperProfile([1.0, 2.0], [300.0, 140.0])

    def test_monotone_width(self):
        """Test that widths cannot widen toward the tip"""
        with pytest.raises(TaperError):
            TaperProfile([0.0, 1.0, 2.0], [300.0, 140.0, 200.0])

    def test_reversed(self):
        """Test traversal from the tip"""
        profile = linear_profile(300, 140, 10.0, n_samples=3).reversed()
        assert profile.tip_first
        np.testing.assert_allclose(profile.w, [140.0, 220.0, 300.0])
        np.testing.assert_allclose(profile.y, [0.0, 5.0, 10.0])


class TestTwoModeBeating:
    """Test suite for the two-supermode transfer model"""

    def test_beat_length(self):
        """Test L_beat = lambda / (2 dn)"""
        assert beat_length(2.0, 1.99, 940.0) == pytest.approx(47.0, rel=1e-9)

    def test_full_transfer_at_beat_length(self):
        """Test that the launch field is emptied after one beat length"""
        lb = beat_length(2.0, 1.99, 940.0)
        power = two_mode_power([0.0, lb / 2, lb], 2.0, 1.99, 940.0)
        np.testing.assert_allclose(power, [1.0, 0.5, 0.0], atol=1e-12)

    def test_degenerate(self):
        """Test that equal indices have no beat length"""
        with pytest.raises(DispersionGapError):
            beat_length(2.0, 2.0, 940.0)


class TestDispersionTable:
    """Test suite for building tables from solved modes"""

    def test_two_highest_te(self, spot):
        """Test that TM-like supermodes are skipped"""
        bare = [[spot(320, 240, 2.0)], [spot(320, 240, 2.2)]]
        coupled = [
            [spot(320, 240, 2.3, te=False), spot(320, 240, 2.1), spot(160, 240, 1.9)],
            [spot(320, 240, 2.4, te=False), spot(320, 240, 2.25), spot(160, 240, 1.95)],
        ]
        table = dispersion_table([150.0, 250.0], bare, coupled)
        np.testing.assert_allclose(table.n_wg, [2.0, 2.2])
        np.testing.assert_allclose(table.n_eff1, [2.1, 2.25])
        np.testing.assert_allclose(table.n_eff2, [1.9, 1.95])
        assert table.wavelength == 940.0

    def test_missing_supermode(self, spot):
        """Test that one TE-like supermode is not enough"""
        with pytest.raises(TaperError):
            dispersion_table([150.0, 250.0], [[spot(320, 240, 2.0)]] * 2, [[spot(320, 240, 2.1)]] * 2)

    def test_csv_exchange(self, tmp_path, dispersion):
        """Test that profiles and tables survive their CSV files"""
        profile = design_taper(dispersion, 300, 140, alpha=0.1, n_samples=21)
        again = read_profile_csv(write_profile_csv(tmp_path / "profile.csv", profile))
        np.testing.assert_allclose(again.w, profile.w)
        np.testing.assert_allclose(again.y, profile.y, rtol=1e-9)

        table = read_dispersion_csv(write_dispersion_csv(tmp_path / "dispersion.csv", dispersion), 940.0)
        np.testing.assert_allclose(table.gap, GAP, rtol=1e-7)
