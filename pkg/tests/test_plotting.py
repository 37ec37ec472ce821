"""
Tests for figure output
"""

import numpy as np

from taperlink.plotting import save_line_plot


class TestLinePlot:

    @staticmethod
    def series():
        w = np.linspace(100.0, 400.0, 7)
        return {"waveguide 0": (w, 1.5 + w / 400.0), "waveguide 1": (w, 1.4 + w / 800.0)}

    def test_one_curve_per_series(self, tmp_path):
        """Test one labelled curve per series"""
        path = save_line_plot(tmp_path / "sweep.svg", self.series(), x_label="width (nm)", y_label="n_eff")
        text = path.read_text()
        assert path.name == "sweep.svg"
        assert "<svg" in text
        assert 'id="series-0"' in text and 'id="series-1"' in text
        assert "series-2" not in text
        assert "width (nm)" in text
        assert "waveguide 1" in text

    def test_reproducible(self, tmp_path):
        """Test that repeated plots are byte-identical"""
        a = save_line_plot(tmp_path / "a.svg", self.series(), title="sweep")
        b = save_line_plot(tmp_path / "b.svg", self.series(), title="sweep")
        assert a.read_text() == b.read_text()

    def test_empty(self, tmp_path):
        """Test that no series still writes a valid figure"""
        text = save_line_plot(tmp_path / "empty.svg", {}).read_text()
        assert "<svg" in text
        assert "series-0" not in text
