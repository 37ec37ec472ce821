"""
Tests for cross-section construction
"""

import numpy as np
import pytest

from taperlink.errors import GeometryError
from taperlink.geometry import (
    CouplerGeometry,
    GuideSelector,
    MaterialSet,
    build_cross_section,
    build_slab_section,
    dielectric_area,
    permittivity_components,
)


class TestGuideSelector:
    """Test suite for GuideSelector parsing"""

    def test_parse_strings(self):
        """Test that string forms map to members"""
        assert GuideSelector.parse("coupled") is GuideSelector.COUPLED
        assert GuideSelector.parse("fiber-only") is GuideSelector.FIBER
        assert GuideSelector.parse("WAVEGUIDE_only") is GuideSelector.WAVEGUIDE

    def test_parse_unknown(self):
        """Test that unknown selectors are rejected"""
        with pytest.raises(GeometryError):
            GuideSelector.parse("ring")


class TestCouplerGeometry:
    """Test suite for geometry validation"""

    def test_defaults(self):
        """Test the design point"""
        geom = CouplerGeometry()
        assert geom.wg_width == 300.0
        assert geom.wg_thickness == 160.0
        assert geom.fiber_diameter == 1000.0
        assert geom.gap == 0.0
        assert geom.wavelength == 940.0

    @pytest.mark.parametrize("field", ["wg_width", "wg_thickness", "fiber_diameter", "wavelength"])
    def test_non_positive_rejected(self, field):
        """Test that non-positive dimensions raise GeometryError"""
        with pytest.raises(GeometryError, match=field):
            CouplerGeometry(**{field: -5.0})

    def test_negative_gap_rejected(self):
        """Test that a negative gap raises GeometryError"""
        with pytest.raises(GeometryError):
            CouplerGeometry(gap=-1.0)

    def test_with_width_copies(self):
        """Test that with_width leaves the original untouched"""
        geom = CouplerGeometry()
        narrow = geom.with_width(140)
        assert narrow.wg_width == 140.0
        assert geom.wg_width == 300.0

    def test_materials_below_background_rejected(self):
        """Test that a core index below the background raises GeometryError"""
        with pytest.raises(GeometryError):
            MaterialSet(n_core_wg=1.0, n_fiber=1.45, n_background=1.0)


class TestBuildCrossSection:
    """Test suite for rasterized cross-sections"""

    @pytest.fixture
    def geom(self):
        return CouplerGeometry()

    @pytest.fixture
    def materials(self):
        return MaterialSet()

    def test_shared_grid_across_selectors(self, geom, materials):
        """Test that all selectors of one geometry share a grid"""
        keys = {build_cross_section(geom, materials, 20.0, which).grid_key for which in GuideSelector}
        assert len(keys) == 1

    def test_domain_size(self, geom, materials):
        """Test domain dimensions for the design point"""
        cs = build_cross_section(geom, materials, 20.0)
        assert cs.nx == int(np.ceil((1000 + 2000) / 20.0))
        assert cs.ny == int(np.ceil((160 + 1000 + 2000) / 20.0))

    def test_index_range(self, geom, materials):
        """Test that smoothed indices stay between background and core"""
        cs = build_cross_section(geom, materials, 20.0)
        assert cs.index_map.min() == pytest.approx(1.0)
        assert cs.index_map.max() == pytest.approx(3.46)

    def test_mirror_symmetry(self, geom, materials):
        """Test that a centred structure gives a mirror-symmetric index map"""
        cs = build_cross_section(geom, materials, 20.0)
        np.testing.assert_allclose(cs.index_map, cs.index_map[::-1, :], atol=1e-12)

    def test_selector_content(self, geom, materials):
        """Test that each selector includes only its guides"""
        wg = build_cross_section(geom, materials, 20.0, GuideSelector.WAVEGUIDE)
        fiber = build_cross_section(geom, materials, 20.0, GuideSelector.FIBER)
        assert wg.index_map.max() == pytest.approx(3.46)
        assert fiber.index_map.max() == pytest.approx(1.45)
        assert np.all(fiber.index_map < 1.45 + 1e-12)
        assert np.any(wg.index_map > 3.0)

    def test_coarse_resolution_rejected(self, materials):
        """Test that too few cells across the waveguide raise GeometryError"""
        with pytest.raises(GeometryError, match="wg_width"):
            build_cross_section(CouplerGeometry(wg_width=100.0), materials, 20.0)

    def test_resolution_cap(self, geom, materials):
        """Test that resolutions above 20 nm are rejected"""
        with pytest.raises(GeometryError):
            build_cross_section(geom, materials, 25.0)

    def test_small_padding_rejected(self, geom, materials):
        """Test that padding below 1000 nm is rejected"""
        with pytest.raises(GeometryError, match="padding"):
            build_cross_section(geom, materials, 20.0, padding=500.0)

    def test_dielectric_area_matches_geometry(self, geom, materials):
        """Test that smoothing preserves the dielectric area"""
        cs = build_cross_section(geom, materials, 10.0)
        expected = (3.46 ** 2 - 1) * 300 * 160 + (1.45 ** 2 - 1) * np.pi * 500 ** 2
        assert dielectric_area(cs) == pytest.approx(expected, rel=5e-3)

    def test_dielectric_area_converges(self, geom, materials):
        """Test that the dielectric area changes little under refinement"""
        coarse = dielectric_area(build_cross_section(geom, materials, 20.0))
        fine = dielectric_area(build_cross_section(geom, materials, 10.0))
        assert abs(coarse - fine) / fine < 1e-2

    def test_staggered_components(self, geom, materials):
        """Test that the three permittivity samplings are present and bounded"""
        eps = permittivity_components(build_cross_section(geom, materials, 20.0))
        assert set(eps) == {"x", "y", "z"}
        for values in eps.values():
            assert values.min() >= 1.0 - 1e-12
            assert values.max() <= 3.46 ** 2 + 1e-9

    def test_fiber_offset_breaks_symmetry(self, materials):
        """Test that a lateral fiber offset moves the fiber"""
        cs = build_cross_section(CouplerGeometry(fiber_offset=200.0), materials, 20.0, GuideSelector.FIBER)
        assert not np.allclose(cs.index_map, cs.index_map[::-1, :])


class TestSlabSection:
    """Test suite for the periodic slab column"""

    def test_single_column(self):
        """Test that the slab is one periodic column"""
        cs = build_slab_section(160.0, MaterialSet(), resolution=2.0)
        assert cs.nx == 1
        assert cs.periodic_x
        assert cs.ny == int(np.ceil((160 + 2000) / 2.0))

    def test_slab_area(self):
        """Test the slab dielectric area per unit width"""
        cs = build_slab_section(160.0, MaterialSet(), resolution=2.0)
        assert dielectric_area(cs) / cs.dx == pytest.approx((3.46 ** 2 - 1) * 160, rel=1e-6)

    def test_too_coarse(self):
        """Test that a slab thinner than eight cells is rejected"""
        with pytest.raises(GeometryError):
            build_slab_section(100.0, MaterialSet(), resolution=20.0)
