"""
Tests for configuration loading
"""

import pytest

from config.settings import bundled, default_values, load_config
from taperlink.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return str(path)


class TestDefaults:
    """Test suite for built-in defaults"""

    def test_design_point(self):
        """Test the default cross-section"""
        config = load_config()
        assert config.geometry.wg_width == 300.0
        assert config.geometry.wg_thickness == 160.0
        assert config.geometry.fiber_diameter == 1000.0
        assert config.geometry.wavelength == 940.0
        assert config.materials.n_core_wg == 3.46
        assert config.source is None
        assert config.overridden == []

    def test_taper_defaults(self):
        """Test the taper and solver defaults"""
        config = load_config()
        assert (config.taper.w_start_nm, config.taper.w_tip_nm, config.taper.alpha) == (300.0, 140.0, 0.1)
        assert config.taper.contact_window_um is None
        assert config.solver.sweep_points == 15

    def test_defaults_are_copies(self):
        """Test that callers cannot mutate the schema defaults"""
        values = default_values()
        values["budget"]["offchip"]["x"] = 1.0
        assert default_values()["budget"]["offchip"] == {}

    def test_dotted_lookup(self):
        """Test access by dotted key"""
        assert load_config().get("fit.envelope_threshold") == 0.05


class TestFiles:
    """Test suite for YAML files"""

    def test_bundled_table(self):
        """Test the bundled efficiency budget"""
        config = load_config(bundled("pcwg_budget"))
        assert config.budget.offchip["Fiber transmission"].value == 0.821
        assert config.budget.offchip["Fiber transmission"].sigma == 0.018
        assert config.budget.eta_cf.value == 0.496
        assert config.source.endswith("pcwg_budget.yaml")

    def test_bundled_missing(self):
        """Test an unknown bundled name"""
        with pytest.raises(ConfigError):
            bundled("nonexistent")

    def test_missing_file(self, tmp_path):
        """Test a path that does not exist"""
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.yaml"))

    def test_unknown_key_line(self, tmp_path):
        """Test that an unknown key is reported with its line"""
        path = write(tmp_path, "geometry:\n  wg_width_nm: 250\n  wg_widht_nm: 260\n")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert exc.value.line == 3
        assert exc.value.key == "geometry.wg_widht_nm"
        assert "line 3" in str(exc.value)

    def test_unknown_section(self, tmp_path):
        """Test that an unknown section is rejected"""
        with pytest.raises(ConfigError) as exc:
            load_config(write(tmp_path, "# comment\nmeshing:\n  order: 2\n"))
        assert exc.value.line == 2

    def test_invalid_yaml(self, tmp_path):
        """Test a syntax error"""
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "geometry: [1, 2\n"))

    def test_empty_file(self, tmp_path):
        """Test that an empty file yields the defaults"""
        assert load_config(write(tmp_path, "")).geometry.wg_width == 300.0


class TestPrecedence:
    """Test suite for layering"""

    def test_file_over_default(self, tmp_path):
        """Test that the file overrides the defaults"""
        config = load_config(write(tmp_path, "geometry:\n  wg_width_nm: 250\n"))
        assert config.geometry.wg_width == 250.0
        assert config.overridden == ["geometry.wg_width_nm"]

    def test_flag_over_file(self, tmp_path):
        """Test that flags override the file"""
        path = write(tmp_path, "geometry:\n  wg_width_nm: 250\n")
        config = load_config(path, {"geometry.wg_width_nm": 200.0, "solver.n_modes": None})
        assert config.geometry.wg_width == 200.0
        assert config.solver.n_modes == 6
        assert config.overridden == ["geometry.wg_width_nm"]

    def test_unknown_override(self):
        """Test that flags must name schema keys"""
        with pytest.raises(ConfigError):
            load_config(overrides={"geometry.height": 1.0})


class TestValidation:
    """Test suite for value checks"""

    @pytest.mark.parametrize("override", [
        {"geometry.wg_width_nm": -5.0},
        {"geometry.gap_nm": -1.0},
        {"solver.n_modes": 0},
        {"solver.n_modes": 2.5},
        {"taper.alpha": 1.5},
        {"taper.w_tip_nm": 400.0},
        {"solver.sweep_w_min_nm": 400.0},
        {"materials.n_wg": "high"},
    ])
    def test_rejected(self, override):
        """Test that invalid values raise ConfigError"""
        with pytest.raises(ConfigError):
            load_config(overrides=override)

    def test_message_names_key(self):
        """Test that the message names the offending key"""
        with pytest.raises(ConfigError, match="geometry.wg_width_nm"):
            load_config(overrides={"geometry.wg_width_nm": -5.0})

    def test_contact_window(self, tmp_path):
        """Test the contact window pair"""
        config = load_config(write(tmp_path, "taper:\n  contact_window_um: [5, 25]\n"))
        assert config.taper.contact_window_um == (5.0, 25.0)
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "taper:\n  contact_window_um: [25, 5]\n"))

    def test_bad_measured_stage(self, tmp_path):
        """Test that unreadable budget stages are rejected"""
        with pytest.raises(ConfigError, match="budget.offchip.Filter"):
            load_config(write(tmp_path, "budget:\n  offchip:\n    Filter: lots\n"))
