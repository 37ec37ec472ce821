"""
Forward eigenmode expansion along a taper

The taper is cut into uniform sections. Within a section the local
supermodes accumulate phase exp(i k0 n_eff dy); at each section boundary the
field is re-expanded on the next section's modes. Reflections are neglected.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from taperlink.errors import GridMismatchError, ModeIdentificationError, TaperError
from taperlink.geometry import (
    CouplerGeometry,
    DEFAULT_PADDING_NM,
    DEFAULT_RESOLUTION_NM,
    GuideSelector,
    MIN_FEATURE_CELLS,
    MaterialSet,
    build_cross_section,
)
from taperlink.io_utils import write_csv
from taperlink.modesolver import (
    GuidedMode,
    ModeField,
    fundamental_te,
    mode_overlap,
    projection,
    solve_modes,
    superpose,
)
from taperlink.taper import TaperProfile

logger = logging.getLogger(__name__)

IDENTIFICATION_MIN = 0.5


@dataclass
class TransferRecord:
    """
    Result of one EME propagation.

    `amplitudes[k]` holds the modal amplitudes at the end of section k
    (row 0 is the launch); `fiber_fraction[k]` and `total_power[k]` follow
    the same indexing.
    """
    wavelength: float
    t_fiber: float
    positions: np.ndarray
    amplitudes: List[np.ndarray]
    fiber_fraction: np.ndarray
    total_power: np.ndarray
    n_eff: List[np.ndarray] = field(default_factory=list)
    target_index: int = -1


def transfer_matrix(source: Sequence[ModeField], target: Sequence[ModeField]) -> np.ndarray:
    """
    Projection matrix T[m, n] = <source_n -> target_m>, clipped to be passive.

    Singular values above 1 (truncated, non-orthogonal bases) are clipped so
    that the total modal power never grows.
    """
    T = np.array([[projection(s, t) for s in source] for t in target], dtype=complex)
    u, s, vh = np.linalg.svd(T, full_matrices=False)
    if s.max(initial=0.0) > 1.0:
        logger.debug("clipping transfer singular values (max %.6f)", s.max())
        T = (u * np.minimum(s, 1.0)) @ vh
    return T


def _reference_power(fields: Sequence[ModeField], amplitudes: np.ndarray,
                     reference: Optional[ModeField]) -> float:
    if reference is None:
        return float("nan")
    combined = superpose(fields, amplitudes)
    return float(abs(projection(combined, reference)) ** 2)


def propagate_modes(
    mode_sets: Sequence[Sequence[GuidedMode]],
    lengths_um: Sequence[float],
    launch: Sequence[complex],
    reference: Optional[ModeField] = None,
) -> Tuple[List[np.ndarray], np.ndarray, np.ndarray]:
    """
    Fold modal amplitudes through a chain of pre-solved sections.

    Args:
        mode_sets: Normalized modes of every section, all on one grid
        lengths_um: Length of every section, um (zero allowed)
        launch: Amplitudes on the first section's modes
        reference: Normalized field whose power is recorded after each section

    Returns:
        (amplitudes per section with the launch first, reference power, total power)
    """
    if len(mode_sets) == 0 or len(mode_sets) != len(lengths_um):
        raise TaperError("one length per section required")
    a = np.asarray(launch, dtype=complex)
    if a.shape != (len(mode_sets[0]),):
        raise TaperError("launch vector must match the first section's modes")

    amplitudes = [a.copy()]
    ref_power = [_reference_power(mode_sets[0], a, reference)]
    total = [float(np.sum(np.abs(a) ** 2))]
    for k, (modes, length) in enumerate(zip(mode_sets, lengths_um)):
        wavelength = modes[0].wavelength
        n_eff = np.array([m.n_eff for m in modes])
        a = a * np.exp(2j * np.pi * n_eff * length * 1e3 / wavelength)
        if k + 1 < len(mode_sets):
            a = transfer_matrix(modes, mode_sets[k + 1]) @ a
            modes = mode_sets[k + 1]
        amplitudes.append(a.copy())
        ref_power.append(_reference_power(modes, a, reference))
        total.append(float(np.sum(np.abs(a) ** 2)))
        logger.debug("section %d: power %.6f", k, total[-1])
    return amplitudes, np.array(ref_power), np.array(total)


def _best_match(modes: Sequence[GuidedMode], reference: ModeField) -> Tuple[int, float]:
    overlaps = [mode_overlap(m, reference) for m in modes]
    i = int(np.argmax(overlaps))
    return i, overlaps[i]


def _section_modes(width, geom, materials, which_sections, resolution, padding,
                   min_feature_cells, n_modes, n_eff_guess) -> List[GuidedMode]:
    g = geom.with_width(width)
    if which_sections == "coupled":
        cs = build_cross_section(g, materials, resolution, GuideSelector.COUPLED, padding, min_feature_cells)
        return solve_modes(cs, n_modes=n_modes, n_eff_guess=n_eff_guess)
    # outside the contact window the guides are uncoupled
    wg = build_cross_section(g, materials, resolution, GuideSelector.WAVEGUIDE, padding, min_feature_cells)
    fib = build_cross_section(g, materials, resolution, GuideSelector.FIBER, padding, min_feature_cells)
    half = max(1, n_modes // 2)
    modes = solve_modes(wg, n_modes=half, n_eff_guess=n_eff_guess)
    modes += solve_modes(fib, n_modes=max(1, n_modes - half), n_eff_guess=min(n_eff_guess, materials.n_fiber))
    return sorted(modes, key=lambda m: m.n_eff, reverse=True)


def propagate_eme(
    profile: TaperProfile,
    geom: CouplerGeometry,
    materials: MaterialSet,
    wavelength: float,
    n_sections: int = 60,
    n_modes: int = 6,
    resolution: float = DEFAULT_RESOLUTION_NM,
    padding: float = DEFAULT_PADDING_NM,
    min_feature_cells: int = MIN_FEATURE_CELLS,
    contact_window: Optional[Tuple[float, float]] = None,
    reverse: bool = False,
    n_eff_guess: Optional[float] = None,
    n_jobs: int = 1,
) -> TransferRecord:
    """
    Power transferred from the waveguide into the fiber along a taper.

    A unit-power waveguide-like supermode (best overlap with the bare
    waveguide TE mode at the start width) is launched; T_fiber is the final
    power in the supermode best matching the bare-fiber HE11 mode. With
    `reverse` the taper is traversed from the tip, the fiber-like mode is
    launched and the waveguide-like output is reported.

    Args:
        profile: Taper profile
        geom: Geometry template (width replaced per section)
        materials: Refractive indices
        wavelength: Free-space wavelength, nm
        n_sections: Number of uniform sections
        n_modes: Modes kept per section
        resolution: Grid spacing, nm (refined to resolve the tip)
        contact_window: (y0, y1) in um where the fiber touches the taper;
            None means full contact
        reverse: Launch from the fiber end
        n_eff_guess: Eigensolver shift; defaults just below the core index
        n_jobs: Parallel section solves

    Returns:
        TransferRecord
    """
    if n_sections < 1 or n_modes < 2:
        raise TaperError("need n_sections >= 1 and n_modes >= 2")
    geom = geom.with_wavelength(wavelength)
    path = profile.reversed() if reverse else profile
    guess = materials.max_index - 1e-3 if n_eff_guess is None else n_eff_guess

    finest = min(float(path.w.min()), geom.wg_thickness) / min_feature_cells
    if finest < resolution:
        logger.info("refining EME grid to %.3f nm to resolve w = %.0f nm", finest, path.w.min())
        resolution = finest

    zero_length = len(path.y) < 2 or path.length <= 0
    if zero_length:
        centers = np.array([0.0])
        lengths = np.array([0.0])
    else:
        edges = np.linspace(0.0, path.length, n_sections + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        lengths = np.diff(edges)
    widths = path.width_at(centers)
    kinds = ["coupled"] * len(centers)
    if contact_window is not None:
        y0, y1 = sorted(contact_window)
        # window positions are measured along the forward profile
        forward_centers = path.length - centers if reverse else centers
        kinds = ["coupled" if y0 <= c <= y1 else "uncoupled" for c in forward_centers]

    args = (geom, materials)
    options = (resolution, padding, min_feature_cells, n_modes, guess)
    mode_sets = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_section_modes)(w, *args, kind, *options) for w, kind in zip(widths, kinds)
    )
    keys = {modes[0].grid_key for modes in mode_sets}
    if len(keys) != 1:
        raise GridMismatchError("taper sections do not share a grid; lower the start width or enlarge the fiber")

    start_geom = geom.with_width(profile.w_start)
    bare_wg = fundamental_te(solve_modes(
        build_cross_section(start_geom, materials, resolution, GuideSelector.WAVEGUIDE, padding, min_feature_cells),
        n_modes=2, n_eff_guess=guess))
    bare_fiber = fundamental_te(solve_modes(
        build_cross_section(start_geom, materials, resolution, GuideSelector.FIBER, padding, min_feature_cells),
        n_modes=2, n_eff_guess=min(guess, materials.n_fiber)))
    launch_ref, target_ref = (bare_fiber, bare_wg) if reverse else (bare_wg, bare_fiber)

    launch_index, launch_overlap = _best_match(mode_sets[0], launch_ref)
    launch = np.zeros(len(mode_sets[0]), dtype=complex)
    launch[launch_index] = 1.0
    logger.info("launching mode %d (n_eff %.5f, overlap %.3f)", launch_index,
                mode_sets[0][launch_index].n_eff, launch_overlap)

    amplitudes, fiber_fraction, total = propagate_modes(mode_sets, lengths, launch, reference=bare_fiber)

    target_index, target_overlap = _best_match(mode_sets[-1], target_ref)
    if target_overlap <= IDENTIFICATION_MIN:
        raise ModeIdentificationError(
            f"no output mode overlaps the reference by more than {IDENTIFICATION_MIN} "
            f"(best {target_overlap:.3f})"
        )
    t_out = float(abs(amplitudes[-1][target_index]) ** 2)
    logger.info("lambda = %.1f nm: T = %.4f over %d sections", wavelength, t_out, len(mode_sets))

    positions = np.concatenate(([0.0], np.cumsum(lengths)))
    return TransferRecord(
        wavelength=float(wavelength),
        t_fiber=t_out,
        positions=positions,
        amplitudes=amplitudes,
        fiber_fraction=fiber_fraction,
        total_power=total,
        n_eff=[np.array([m.n_eff for m in modes]) for modes in mode_sets],
        target_index=target_index,
    )


def sweep_wavelength(
    profile: TaperProfile,
    geom: CouplerGeometry,
    materials: MaterialSet,
    wavelengths: Sequence[float],
    n_jobs: int = 1,
    **options,
) -> List[Tuple[float, float]]:
    """
    T_fiber versus wavelength, one propagate_eme per point.

    Returns:
        Rows (lambda_nm, T_fiber) in input order
    """
    grid = np.asarray(wavelengths, dtype=float)
    if len(grid) == 0:
        raise TaperError("empty wavelength list")
    if len(grid) > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise TaperError("wavelength grid must be strictly monotone")
    records = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(propagate_eme)(profile, geom, materials, lam, **options) for lam in grid
    )
    return [(float(lam), rec.t_fiber) for lam, rec in zip(grid, records)]


TRANSFER_HEADER = ("y_um", "fiber_fraction", "total_power")
SPECTRUM_HEADER = ("lambda_nm", "T_fiber")


def write_transfer_csv(path, record: TransferRecord):
    """Power bookkeeping after every section"""
    return write_csv(path, TRANSFER_HEADER, zip(record.positions, record.fiber_fraction, record.total_power))


def write_spectrum_csv(path, rows: Sequence[Tuple[float, float]]):
    return write_csv(path, SPECTRUM_HEADER, rows)
