"""
Geometry: discretized cross-sections of the waveguide/microfiber coupler

A suspended rectangular waveguide sits at the bottom of the computational
domain and a circular microfiber rests on top of it, separated by a vertical
gap. The domain is padded with background material on every side.

Coordinates: x runs horizontally and is measured from the vertical symmetry
axis of the domain, y runs vertically from the bottom edge. Arrays are
indexed [ix, iy].
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from taperlink.errors import GeometryError

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION_NM = 10.0
DEFAULT_PADDING_NM = 1000.0
MAX_RESOLUTION_NM = 20.0
MIN_FEATURE_CELLS = 8
SUBSAMPLES = 8


class GuideSelector(Enum):
    """Which guides are present in a cross-section"""
    WAVEGUIDE = "waveguide"
    FIBER = "fiber"
    COUPLED = "coupled"

    @classmethod
    def parse(cls, value) -> "GuideSelector":
        """Accept an enum member or its string form ('fiber-only' etc.)"""
        if isinstance(value, cls):
            return value
        text = str(value).lower().replace("-only", "").replace("_only", "")
        for member in cls:
            if member.value == text:
                return member
        raise GeometryError(f"unknown guide selector '{value}'")


@dataclass(frozen=True)
class MaterialSet:
    """Refractive indices of the waveguide core, the fiber and the background"""
    n_core_wg: float = 3.46
    n_fiber: float = 1.45
    n_background: float = 1.0

    def __post_init__(self):
        for name in ("n_core_wg", "n_fiber", "n_background"):
            if getattr(self, name) < 1.0:
                raise GeometryError(f"{name} must be >= 1.0, got {getattr(self, name)}")
        if self.n_core_wg <= self.n_background or self.n_fiber <= self.n_background:
            raise GeometryError("core and fiber indices must exceed the background index")

    @property
    def max_index(self) -> float:
        return max(self.n_core_wg, self.n_fiber)


@dataclass(frozen=True)
class CouplerGeometry:
    """
    Geometric parameters of the coupled system, all lengths in nm.

    The validated width regime is 50 nm <= wg_width <= 350 nm.
    """
    wg_width: float = 300.0
    wg_thickness: float = 160.0
    fiber_diameter: float = 1000.0
    gap: float = 0.0
    wavelength: float = 940.0
    fiber_offset: float = 0.0

    def __post_init__(self):
        for name in ("wg_width", "wg_thickness", "fiber_diameter", "wavelength"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.gap) or self.gap < 0:
            raise GeometryError(f"gap must be >= 0, got {self.gap}")
        if not 50.0 <= self.wg_width <= 350.0:
            logger.debug("wg_width %.1f nm outside the validated 50-350 nm regime", self.wg_width)

    def with_width(self, width: float) -> "CouplerGeometry":
        """Copy with a different waveguide width"""
        return replace(self, wg_width=float(width))

    def with_wavelength(self, wavelength: float) -> "CouplerGeometry":
        """Copy with a different free-space wavelength"""
        return replace(self, wavelength=float(wavelength))


@dataclass
class CrossSection:
    """
    Pixelized index map of one cross-section.

    `index_map` holds the smoothed index at cell centres. The permittivities
    at the three staggered field positions used by the mode solver are
    carried alongside so the solver never re-rasterizes.
    """
    nx: int
    ny: int
    dx: float
    dy: float
    index_map: np.ndarray
    which: GuideSelector
    materials: MaterialSet
    geometry: Optional[CouplerGeometry]
    wavelength: float
    padding: float = DEFAULT_PADDING_NM
    periodic_x: bool = False
    eps_components: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def grid_key(self) -> Tuple[int, int, float, float]:
        """Identity of the grid; modes are only comparable on equal keys"""
        return (self.nx, self.ny, round(self.dx, 9), round(self.dy, 9))

    @property
    def x(self) -> np.ndarray:
        """Cell-centre x coordinates relative to the symmetry axis, nm"""
        return (np.arange(self.nx) + 0.5 - self.nx / 2.0) * self.dx

    @property
    def y(self) -> np.ndarray:
        """Cell-centre y coordinates from the bottom edge, nm"""
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def max_index(self) -> float:
        return float(self.index_map.max())


def _rasterize(
    eps_of: Callable[[np.ndarray, np.ndarray], np.ndarray],
    nx: int,
    ny: int,
    dx: float,
    dy: float,
    shift: Tuple[float, float] = (0.0, 0.0),
    subsamples: int = SUBSAMPLES,
) -> np.ndarray:
    """
    Area-weighted average of n^2 over every cell of a (possibly shifted) grid.

    Args:
        eps_of: Function returning eps = n^2 at arrays of points (x, y)
        nx, ny: Grid size
        dx, dy: Grid spacing, nm
        shift: Offset of the sampling cells in units of (dx, dy)
        subsamples: Subsamples per cell and axis

    Returns:
        Array (nx, ny) of smoothed permittivity
    """
    # Offsets are exact binary fractions so mirrored cells see mirrored points.
    offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    ix = np.arange(nx) + 0.5 - nx / 2.0 + shift[0]
    iy = np.arange(ny) + 0.5 + shift[1]
    eps = np.zeros((nx, ny))
    for sx in offsets:
        xs = (ix + sx) * dx
        for sy in offsets:
            ys = (iy + sy) * dy
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            eps += eps_of(X, Y)
    return eps / subsamples ** 2


def _domain_size(geom: CouplerGeometry, padding: float) -> Tuple[float, float]:
    width = max(geom.wg_width, geom.fiber_diameter + 2.0 * abs(geom.fiber_offset)) + 2.0 * padding
    height = geom.wg_thickness + geom.fiber_diameter + geom.gap + 2.0 * padding
    return width, height


def _check_resolution(geom: CouplerGeometry, which: GuideSelector, resolution: float,
                      min_feature_cells: int) -> None:
    if not np.isfinite(resolution) or resolution <= 0:
        raise GeometryError(f"resolution must be positive, got {resolution}")
    if resolution > MAX_RESOLUTION_NM:
        raise GeometryError(f"resolution {resolution} nm exceeds {MAX_RESOLUTION_NM} nm")

    features = {}
    if which in (GuideSelector.WAVEGUIDE, GuideSelector.COUPLED):
        features["wg_width"] = geom.wg_width
        features["wg_thickness"] = geom.wg_thickness
    if which in (GuideSelector.FIBER, GuideSelector.COUPLED):
        features["fiber_diameter"] = geom.fiber_diameter
    name, smallest = min(features.items(), key=lambda kv: kv[1])
    if smallest / resolution < min_feature_cells:
        raise GeometryError(
            f"resolution {resolution} nm gives {smallest / resolution:.1f} cells across "
            f"{name} = {smallest} nm (need {min_feature_cells})"
        )


def build_cross_section(
    geom: CouplerGeometry,
    materials: MaterialSet,
    resolution: float = DEFAULT_RESOLUTION_NM,
    which=GuideSelector.COUPLED,
    padding: float = DEFAULT_PADDING_NM,
    min_feature_cells: int = MIN_FEATURE_CELLS,
) -> CrossSection:
    """
    Rasterize the coupler geometry onto a uniform grid.

    The domain is (max(w, d) + 2*padding) x (t + d + gap + 2*padding) for
    every selector, so waveguide-only, fiber-only and coupled sections of one
    geometry share a grid and their modes can be overlapped.

    Args:
        geom: Coupler geometry
        materials: Refractive indices
        resolution: Grid spacing, nm (<= 20 nm)
        which: Guides to include
        padding: Background padding on every side, nm (>= 1000 nm)
        min_feature_cells: Cells required across the smallest included feature

    Returns:
        CrossSection with smoothed index map and staggered permittivities
    """
    which = GuideSelector.parse(which)
    if padding < DEFAULT_PADDING_NM:
        raise GeometryError(f"padding must be >= {DEFAULT_PADDING_NM} nm, got {padding}")
    _check_resolution(geom, which, resolution, min_feature_cells)

    width, height = _domain_size(geom, padding)
    nx = int(np.ceil(width / resolution - 1e-9))
    ny = int(np.ceil(height / resolution - 1e-9))

    eps_bg = materials.n_background ** 2
    eps_wg = materials.n_core_wg ** 2
    eps_fib = materials.n_fiber ** 2
    half_w = geom.wg_width / 2.0
    wg_bottom = padding
    wg_top = padding + geom.wg_thickness
    radius = geom.fiber_diameter / 2.0
    fiber_cx = geom.fiber_offset
    fiber_cy = wg_top + geom.gap + radius
    include_wg = which in (GuideSelector.WAVEGUIDE, GuideSelector.COUPLED)
    include_fiber = which in (GuideSelector.FIBER, GuideSelector.COUPLED)

    def eps_of(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        eps = np.full(X.shape, eps_bg)
        if include_fiber:
            eps[(X - fiber_cx) ** 2 + (Y - fiber_cy) ** 2 <= radius ** 2] = eps_fib
        if include_wg:
            eps[(np.abs(X) <= half_w) & (Y >= wg_bottom) & (Y <= wg_top)] = eps_wg
        return eps

    components = {
        "z": _rasterize(eps_of, nx, ny, resolution, resolution),
        "x": _rasterize(eps_of, nx, ny, resolution, resolution, shift=(0.5, 0.0)),
        "y": _rasterize(eps_of, nx, ny, resolution, resolution, shift=(0.0, 0.5)),
    }
    logger.debug("cross-section %s: %dx%d cells at %.2f nm", which.value, nx, ny, resolution)

    return CrossSection(
        nx=nx,
        ny=ny,
        dx=float(resolution),
        dy=float(resolution),
        index_map=np.sqrt(components["z"]),
        which=which,
        materials=materials,
        geometry=geom,
        wavelength=geom.wavelength,
        padding=padding,
        eps_components=components,
    )


def build_slab_section(
    thickness: float,
    materials: MaterialSet,
    wavelength: float = 940.0,
    resolution: float = 1.0,
    padding: float = DEFAULT_PADDING_NM,
) -> CrossSection:
    """
    One periodic column through an infinite symmetric slab of the core material.

    With a single column and periodic x boundaries the transverse problem
    reduces exactly to the planar slab.
    """
    if thickness <= 0 or wavelength <= 0:
        raise GeometryError("slab thickness and wavelength must be positive")
    if not 0 < resolution <= MAX_RESOLUTION_NM:
        raise GeometryError(f"resolution must lie in (0, {MAX_RESOLUTION_NM}] nm")
    if thickness / resolution < MIN_FEATURE_CELLS:
        raise GeometryError(f"resolution {resolution} nm too coarse for a {thickness} nm slab")

    ny = int(np.ceil((thickness + 2.0 * padding) / resolution - 1e-9))
    eps_bg = materials.n_background ** 2
    eps_core = materials.n_core_wg ** 2

    def eps_of(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        eps = np.full(X.shape, eps_bg)
        eps[(Y >= padding) & (Y <= padding + thickness)] = eps_core
        return eps

    components = {
        "z": _rasterize(eps_of, 1, ny, resolution, resolution),
        "x": _rasterize(eps_of, 1, ny, resolution, resolution, shift=(0.5, 0.0)),
        "y": _rasterize(eps_of, 1, ny, resolution, resolution, shift=(0.0, 0.5)),
    }
    return CrossSection(
        nx=1,
        ny=ny,
        dx=float(resolution),
        dy=float(resolution),
        index_map=np.sqrt(components["z"]),
        which=GuideSelector.WAVEGUIDE,
        materials=materials,
        geometry=None,
        wavelength=float(wavelength),
        padding=padding,
        periodic_x=True,
        eps_components=components,
    )


def dielectric_area(cs: CrossSection) -> float:
    """Total dielectric area sum((n^2 - n_bg^2) dx dy), nm^2"""
    eps_bg = cs.materials.n_background ** 2
    return float(np.sum(cs.index_map ** 2 - eps_bg) * cs.dx * cs.dy)


def permittivity_components(cs: CrossSection) -> Dict[str, np.ndarray]:
    """Smoothed permittivity at the Ez ('z'), Ex ('x') and Ey ('y') sample positions"""
    if set(cs.eps_components) != {"x", "y", "z"}:
        raise GeometryError("cross-section carries no staggered permittivities")
    return dict(cs.eps_components)
