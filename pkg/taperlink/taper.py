"""
Taper: adiabatic width profiles from dispersion tables

The width profile w(y) is synthesized so that the local adiabaticity ratio

    r(y) = (dn_WG/dy) / (k0 |n_eff,1 - n_eff,2|^2)

equals a safety factor alpha everywhere. With dn_WG/dy = (dn_WG/dw)(dw/dy)
this gives dy/dw = (dn_WG/dw) / (alpha k0 dn^2), integrated from the start
width down to the tip. Positions are in um, widths and wavelengths in nm.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from taperlink.errors import CoverageError, DispersionGapError, TaperError
from taperlink.io_utils import read_columns, write_csv
from taperlink.modesolver import GuidedMode, fundamental_te

logger = logging.getLogger(__name__)

MIN_GAP = 1e-4
LENGTH_RTOL = 1e-9
DEFAULT_ALPHA = 0.1
DEFAULT_SAMPLES = 401


def _k0_per_um(wavelength_nm: float) -> float:
    return 2.0 * np.pi / (wavelength_nm * 1e-3)


@dataclass
class TaperProfile:
    """
    Width w (nm) versus position y (um) along the taper.

    Widths are non-increasing, or non-decreasing for a profile traversed
    tip-first (`tip_first`).
    """
    y: np.ndarray
    w: np.ndarray
    tip_first: bool = False

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if len(self.y) != len(self.w) or len(self.y) == 0:
            raise TaperError("profile needs equal-length, non-empty y and w")
        if abs(self.y[0]) > 1e-12:
            raise TaperError(f"profile must start at y = 0, got {self.y[0]}")
        if np.any(np.diff(self.y) <= 0):
            raise TaperError("profile positions must be strictly increasing")
        steps = -np.diff(self.w) if self.tip_first else np.diff(self.w)
        if np.any(steps > 1e-9):
            raise TaperError("profile widths must be monotone from start to tip")

    @property
    def length(self) -> float:
        return float(self.y[-1])

    @property
    def w_start(self) -> float:
        return float(self.w[0])

    @property
    def w_tip(self) -> float:
        return float(self.w[-1])

    def width_at(self, y) -> np.ndarray:
        return np.interp(y, self.y, self.w)

    def reversed(self) -> "TaperProfile":
        """The same taper traversed from the tip (fiber launch)"""
        return TaperProfile(self.length - self.y[::-1], self.w[::-1], tip_first=not self.tip_first)


@dataclass
class TaperDispersion:
    """
    Tabulated dispersion of the bare waveguide and the two highest TE-like
    supermodes of the coupled system, versus waveguide width (nm).
    """
    widths: np.ndarray
    n_wg: np.ndarray
    n_eff1: np.ndarray
    n_eff2: np.ndarray
    wavelength: float

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.widths, self.n_wg, self.n_eff1, self.n_eff2)]
        if len({len(a) for a in arrays}) != 1 or len(arrays[0]) < 2:
            raise TaperError("dispersion table needs >= 2 widths and equal-length columns")
        order = np.argsort(arrays[0])
        self.widths, self.n_wg, self.n_eff1, self.n_eff2 = (a[order] for a in arrays)
        if np.any(np.diff(self.widths) <= 0):
            raise TaperError("dispersion widths must be distinct")
        self._dndw = PchipInterpolator(self.widths, np.gradient(self.n_wg, self.widths))
        self._gap = PchipInterpolator(self.widths, np.abs(self.n_eff1 - self.n_eff2))

    @property
    def gap(self) -> np.ndarray:
        return np.abs(self.n_eff1 - self.n_eff2)

    def covers(self, w_lo: float, w_hi: float) -> bool:
        return self.widths[0] - 1e-9 <= w_lo and w_hi <= self.widths[-1] + 1e-9

    def dndw(self, w) -> np.ndarray:
        """dn_WG/dw (1/nm) by central differences, monotone-cubic between samples"""
        return self._dndw(w)

    def gap_at(self, w) -> np.ndarray:
        return self._gap(w)


def dispersion_table(
    widths: Sequence[float],
    wg_modes: Sequence[Sequence[GuidedMode]],
    coupled_modes: Sequence[Sequence[GuidedMode]],
) -> TaperDispersion:
    """
    Build a TaperDispersion from per-width bare-waveguide and coupled mode lists.

    The coupled columns are the two highest TE-like modes at each width.
    """
    if not (len(widths) == len(wg_modes) == len(coupled_modes)):
        raise TaperError("one bare and one coupled mode list per width required")
    n_wg, n1, n2 = [], [], []
    wavelength = None
    for w, bare, coupled in zip(widths, wg_modes, coupled_modes):
        n_wg.append(fundamental_te(bare).n_eff)
        te = sorted((m for m in coupled if m.te_fraction > 0.5), key=lambda m: m.n_eff, reverse=True)
        if len(te) < 2:
            raise TaperError(f"fewer than two TE-like supermodes at w = {w:g} nm; raise n_modes")
        n1.append(te[0].n_eff)
        n2.append(te[1].n_eff)
        wavelength = te[0].wavelength
    return TaperDispersion(np.asarray(widths, dtype=float), np.array(n_wg), np.array(n1), np.array(n2),
                           wavelength)


def _check_dispersion(dispersion: TaperDispersion, w_start: float, w_tip: float) -> np.ndarray:
    if not w_tip < w_start:
        raise TaperError(f"tip width {w_tip} must be below start width {w_start}")
    if not dispersion.covers(w_tip, w_start):
        raise CoverageError(
            f"dispersion covers {dispersion.widths[0]:g}-{dispersion.widths[-1]:g} nm, "
            f"taper needs {w_tip:g}-{w_start:g} nm"
        )
    inside = (dispersion.widths >= w_tip - 1e-9) & (dispersion.widths <= w_start + 1e-9)
    if np.any(np.diff(dispersion.n_wg[inside]) <= 0):
        raise TaperError("bare-waveguide index is not monotone in width over the taper range")
    gaps = dispersion.gap[inside]
    if gaps.min() < MIN_GAP:
        raise DispersionGapError(f"supermode gap {gaps.min():.2e} below {MIN_GAP:g}",
                                 float(dispersion.widths[inside][np.argmin(gaps)]))
    return inside


def _dydw(dispersion: TaperDispersion, w: np.ndarray, alpha: float, wavelength: float) -> np.ndarray:
    gap = dispersion.gap_at(w)
    if gap.min() < MIN_GAP:
        raise DispersionGapError(f"interpolated supermode gap {gap.min():.2e} below {MIN_GAP:g}",
                                 float(w[np.argmin(gap)]))
    dndw = dispersion.dndw(w)
    if dndw.min() <= 0:
        raise TaperError(f"dn_WG/dw not positive at w = {w[np.argmin(dndw)]:g} nm")
    return dndw / (alpha * _k0_per_um(wavelength) * gap ** 2)


def _positions(dispersion: TaperDispersion, w: np.ndarray, alpha: float, wavelength: float) -> np.ndarray:
    return cumulative_trapezoid(_dydw(dispersion, w, alpha, wavelength), -w, initial=0.0)


def design_taper(
    dispersion: TaperDispersion,
    w_start: float,
    w_tip: float,
    alpha: float = DEFAULT_ALPHA,
    wavelength: Optional[float] = None,
    n_samples: int = DEFAULT_SAMPLES,
) -> TaperProfile:
    """
    Shortest taper from w_start to w_tip whose adiabaticity ratio equals alpha.

    Args:
        dispersion: Tabulated n_WG, n_eff,1, n_eff,2 covering [w_tip, w_start]
        w_start: Start width, nm
        w_tip: Tip width, nm
        alpha: Safety factor in (0, 1)
        wavelength: Free-space wavelength, nm (defaults to the table's)
        n_samples: Number of profile samples (uniform in width)

    Returns:
        TaperProfile with y from 0 to L
    """
    if not 0.0 < alpha < 1.0:
        raise TaperError(f"alpha must lie in (0, 1), got {alpha}")
    if n_samples < 2:
        raise TaperError("n_samples must be >= 2")
    wavelength = dispersion.wavelength if wavelength is None else wavelength
    _check_dispersion(dispersion, w_start, w_tip)

    w = np.linspace(w_start, w_tip, n_samples)
    y = _positions(dispersion, w, alpha, wavelength)
    logger.info("designed taper %.0f -> %.0f nm at alpha=%.3f: L = %.3f um", w_start, w_tip, alpha, y[-1])
    return TaperProfile(y, w)


def alpha_for_length(
    dispersion: TaperDispersion,
    w_start: float,
    w_tip: float,
    length_um: float,
    wavelength: Optional[float] = None,
    n_samples: int = DEFAULT_SAMPLES,
) -> float:
    """
    Safety factor whose synthesized taper has the requested length.

    L scales as 1/alpha, so alpha = L(alpha=1) / L. The closed form is
    confirmed by root-finding on the synthesized length.

    Raises:
        TaperError: alpha outside (0, 1), or the two estimates disagree
    """
    if length_um <= 0:
        raise TaperError(f"target length must be positive, got {length_um}")
    wavelength = dispersion.wavelength if wavelength is None else wavelength
    _check_dispersion(dispersion, w_start, w_tip)
    w = np.linspace(w_start, w_tip, n_samples)
    unit_length = float(_positions(dispersion, w, 1.0, wavelength)[-1])
    alpha = unit_length / length_um
    if not 0.0 < alpha < 1.0:
        raise TaperError(f"a {length_um:g} um taper needs alpha = {alpha:.3f}, outside (0, 1)")

    def excess(a):
        return float(_positions(dispersion, w, a, wavelength)[-1]) - length_um

    bisected = brentq(excess, 0.5 * alpha, 2.0 * alpha, rtol=1e-12)
    if abs(bisected - alpha) > LENGTH_RTOL * alpha:
        raise TaperError(f"closed-form alpha {alpha:.9g} and root-found alpha {bisected:.9g} disagree")
    logger.debug("alpha for %.3f um: %.6f (root-found %.6f)", length_um, alpha, bisected)
    return alpha


@dataclass
class AdiabaticityReport:
    """Pointwise adiabaticity ratio along a profile"""
    y: np.ndarray
    ratio: np.ndarray
    max_ratio: float
    y_at_max: float
    w_at_max: float = float("nan")

    def certified(self, alpha: float) -> bool:
        return self.max_ratio <= alpha


def adiabaticity_margin(
    profile: TaperProfile,
    dispersion: TaperDispersion,
    wavelength: Optional[float] = None,
) -> AdiabaticityReport:
    """
    Evaluate r(y) = (dn_WG/dw)|dw/dy| / (k0 dn^2) along a profile.

    Raises:
        CoverageError: single-point profile or widths outside the table
    """
    if len(profile.y) < 2 or profile.length <= 0:
        raise CoverageError("adiabaticity is undefined for a zero-length profile")
    wavelength = dispersion.wavelength if wavelength is None else wavelength
    w_lo, w_hi = float(profile.w.min()), float(profile.w.max())
    if not dispersion.covers(w_lo, w_hi):
        raise CoverageError(f"profile widths {w_lo:g}-{w_hi:g} nm outside the dispersion table")

    dwdy = np.gradient(profile.w, profile.y, edge_order=2 if len(profile.y) > 2 else 1)
    gap = dispersion.gap_at(profile.w)
    ratio = np.abs(dispersion.dndw(profile.w) * dwdy) / (_k0_per_um(wavelength) * gap ** 2)
    i = int(np.argmax(ratio))
    return AdiabaticityReport(profile.y.copy(), ratio, float(ratio[i]), float(profile.y[i]), float(profile.w[i]))


def linear_profile(w_start: float, w_tip: float, length_um: float, n_samples: int = DEFAULT_SAMPLES) -> TaperProfile:
    """Straight-line taper"""
    if length_um <= 0 or n_samples < 2:
        raise TaperError("linear profile needs a positive length and >= 2 samples")
    return TaperProfile(np.linspace(0.0, length_um, n_samples), np.linspace(w_start, w_tip, n_samples))


def beat_length(n1: float, n2: float, wavelength: float) -> float:
    """Full-transfer beat length pi / (k0 |n1 - n2|), um"""
    dn = abs(n1 - n2)
    if dn == 0:
        raise DispersionGapError("degenerate supermodes have no beat length", float("nan"))
    return float(np.pi / (_k0_per_um(wavelength) * dn))


def two_mode_power(
    z_um,
    n1: float,
    n2: float,
    wavelength: float,
    amplitudes: Tuple[complex, complex] = (2 ** -0.5, 2 ** -0.5),
    projections: Tuple[complex, complex] = (2 ** -0.5, 2 ** -0.5),
) -> np.ndarray:
    """
    Power left in a reference field after propagating two supermodes.

    |c1 g1 e^{i k0 n1 z} + c2 g2 e^{i k0 n2 z}|^2 with launch amplitudes c and
    projections g of each supermode on the reference field. The defaults
    (equal symmetric superposition) give cos^2(pi z / (2 L_beat)).
    """
    k0 = _k0_per_um(wavelength)
    z = np.asarray(z_um, dtype=float)
    (c1, c2), (g1, g2) = amplitudes, projections
    field = c1 * g1 * np.exp(1j * k0 * n1 * z) + c2 * g2 * np.exp(1j * k0 * n2 * z)
    return np.abs(field) ** 2


# ---------------------------------------------------------------------------
# CSV exchange

PROFILE_HEADER = ("y_um", "w_nm")
DISPERSION_HEADER = ("width_nm", "n_wg", "n_eff1", "n_eff2")


def write_profile_csv(path, profile: TaperProfile):
    return write_csv(path, PROFILE_HEADER, zip(profile.y, profile.w))


def read_profile_csv(path) -> TaperProfile:
    cols = read_columns(path, PROFILE_HEADER, min_rows=1)
    return TaperProfile(cols["y_um"], cols["w_nm"])


def write_dispersion_csv(path, dispersion: TaperDispersion):
    """Dispersion table as `width_nm,n_wg,n_eff1,n_eff2` (the wavelength is not stored)"""
    rows = zip(dispersion.widths, dispersion.n_wg, dispersion.n_eff1, dispersion.n_eff2)
    return write_csv(path, DISPERSION_HEADER, rows)


def read_dispersion_csv(path, wavelength: float) -> TaperDispersion:
    cols = read_columns(path, DISPERSION_HEADER, min_rows=2)
    return TaperDispersion(cols["width_nm"], cols["n_wg"], cols["n_eff1"], cols["n_eff2"], wavelength)
