"""
Shared fixtures and the --runslow switch
"""

import numpy as np
import pytest

from taperlink.modesolver import GuidedMode, normalize


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run full-resolution physics tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


GRID = (64, 48)
SPACING = 10.0
WAVELENGTH = 940.0


def gaussian(cx: float, cy: float, sigma: float = 40.0) -> np.ndarray:
    """Gaussian spot on the shared test grid (cell indices scaled by SPACING)"""
    x = (np.arange(GRID[0]) + 0.5) * SPACING
    y = (np.arange(GRID[1]) + 0.5) * SPACING
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * sigma ** 2))


def make_mode(profile: np.ndarray, n_eff: float, te: bool = True) -> GuidedMode:
    """Unit-power x- (te) or y-polarized mode with E = H profile"""
    zero = np.zeros_like(profile)
    if te:
        mode = GuidedMode(profile, zero, zero, profile, SPACING, SPACING, WAVELENGTH, n_eff=n_eff)
    else:
        mode = GuidedMode(zero, profile, -profile, zero, SPACING, SPACING, WAVELENGTH, n_eff=n_eff)
    return normalize(mode)


@pytest.fixture
def spot():
    """Factory for normalized Gaussian test modes"""
    def factory(cx: float, cy: float, n_eff: float, sigma: float = 40.0, te: bool = True) -> GuidedMode:
        return make_mode(gaussian(cx, cy, sigma), n_eff, te)
    return factory
