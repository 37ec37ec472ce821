"""
Mode solver: full-vector finite-difference guided modes of a CrossSection

The transverse magnetic field (Hx, Hy) on a staggered grid satisfies

    beta^2 h = [ w^2 P + P Cf eps_z^-1 Cb + Gb Gf ] h,   P = diag(eps_y, eps_x)

with Cb = [-Dby, Dbx] (curl to Ez), Cf = [-Dfy; Dfx], Gf = [Dfx, Dfy]
(divergence to Hz) and Gb = [Dbx; Dby]. Units are nm with c = 1, so
w = k0 = 2 pi / lambda. Fields are zero beyond the last sample, which acts as
a conducting wall; the padded domain keeps bound modes away from it.

The transverse E field derived from a solution is a left eigenvector of the
same operator, so the discrete power pairing

    <a|b> = 1/2 sum (Ex_a Hy_b* - Ey_a Hx_b*) dx dy

vanishes between distinct modes of one cross-section.
"""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sparse
from joblib import Parallel, delayed
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from taperlink.errors import (
    AmbiguousMatchWarning,
    DomainTooSmallWarning,
    EigenSolverError,
    GridMismatchError,
    NoGuidedModeError,
    SolverError,
)
from taperlink.geometry import (
    CouplerGeometry,
    CrossSection,
    DEFAULT_PADDING_NM,
    DEFAULT_RESOLUTION_NM,
    GuideSelector,
    MIN_FEATURE_CELLS,
    MaterialSet,
    build_cross_section,
    permittivity_components,
)
from taperlink.io_utils import atomic_write_text, format_grid, write_csv

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
DECAY_TOL = 1e-3
DEGENERACY_TOL = 1e-8
CONTINUITY_MIN = 0.5
AMBIGUITY_WINDOW = 0.01

DEFAULT_GUESS = {
    GuideSelector.WAVEGUIDE: 3.0,
    GuideSelector.FIBER: 1.3,
    GuideSelector.COUPLED: 2.0,
}


@dataclass
class ModeField:
    """Transverse E and H fields on a grid (complex or real arrays of shape (nx, ny))"""
    ex: np.ndarray
    ey: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    dx: float
    dy: float
    wavelength: float

    @property
    def grid_key(self) -> Tuple[int, int, float, float]:
        nx, ny = self.hx.shape
        return (nx, ny, round(self.dx, 9), round(self.dy, 9))

    def scaled(self, factor: complex) -> "ModeField":
        return ModeField(self.ex * factor, self.ey * factor, self.hx * factor,
                         self.hy * factor, self.dx, self.dy, self.wavelength)


@dataclass
class GuidedMode(ModeField):
    """
    One guided eigenmode.

    field_h is (hx, hy); the dominant transverse E component is available as
    `field_e_major`. After `normalize` the power pairing equals 1.
    """
    n_eff: float = float("nan")
    residual: float = 0.0
    domain_ok: bool = True

    @property
    def field_h(self) -> Tuple[np.ndarray, np.ndarray]:
        return (self.hx, self.hy)

    @property
    def te_fraction(self) -> float:
        px = float(np.sum(np.abs(self.ex) ** 2))
        py = float(np.sum(np.abs(self.ey) ** 2))
        total = px + py
        return px / total if total > 0 else 0.0

    @property
    def field_e_major(self) -> np.ndarray:
        return self.ex if self.te_fraction >= 0.5 else self.ey

    def scaled(self, factor: complex) -> "GuidedMode":
        return GuidedMode(self.ex * factor, self.ey * factor, self.hx * factor,
                          self.hy * factor, self.dx, self.dy, self.wavelength,
                          n_eff=self.n_eff, residual=self.residual, domain_ok=self.domain_ok)


# ---------------------------------------------------------------------------
# Operators

def _deriv_forward_1d(n: int, d: float, periodic: bool) -> sparse.csr_matrix:
    """(f[i+1] - f[i]) / d with f[n] = 0, or wrapped when periodic"""
    if periodic:
        if n == 1:
            return sparse.csr_matrix((1, 1))
        op = sparse.diags([-np.ones(n), np.ones(n - 1), [1.0]], [0, 1, -(n - 1)], shape=(n, n))
    else:
        op = sparse.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n))
    return (op / d).tocsr()


def derivative_operators(cs: CrossSection) -> Dict[str, sparse.csr_matrix]:
    """
    Forward and backward difference matrices on the flattened (ix, iy) grid.

    Returns:
        Dictionary with keys 'Dfx', 'Dfy', 'Dbx', 'Dby'
    """
    fx = _deriv_forward_1d(cs.nx, cs.dx, cs.periodic_x)
    fy = _deriv_forward_1d(cs.ny, cs.dy, False)
    ix = sparse.identity(cs.nx, format="csr")
    iy = sparse.identity(cs.ny, format="csr")
    Dfx = sparse.kron(fx, iy, format="csr")
    Dfy = sparse.kron(ix, fy, format="csr")
    # backward differences are the negative transposes of the forward ones
    return {"Dfx": Dfx, "Dfy": Dfy, "Dbx": (-Dfx.T).tocsr(), "Dby": (-Dfy.T).tocsr()}


def build_operator(cs: CrossSection, ops: Optional[Dict[str, sparse.csr_matrix]] = None) -> sparse.csc_matrix:
    """Sparse H-field waveguide operator with eigenvalue beta^2 (nm^-2)"""
    ops = ops or derivative_operators(cs)
    omega = 2.0 * np.pi / cs.wavelength
    eps = permittivity_components(cs)
    eps_x, eps_y, eps_z = (eps[k].ravel() for k in ("x", "y", "z"))

    P = sparse.diags(np.concatenate((eps_y, eps_x)))
    eps_z_inv = sparse.diags(1.0 / eps_z)
    Cb = sparse.hstack((-ops["Dby"], ops["Dbx"]))
    Cf = sparse.vstack((-ops["Dfy"], ops["Dfx"]))
    Gf = sparse.hstack((ops["Dfx"], ops["Dfy"]))
    Gb = sparse.vstack((ops["Dbx"], ops["Dby"]))

    op = omega ** 2 * P + P @ Cf @ eps_z_inv @ Cb + Gb @ Gf
    return op.tocsc()


def _e_from_h(cs: CrossSection, ops: Dict[str, sparse.csr_matrix], hx: np.ndarray,
              hy: np.ndarray, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    omega = 2.0 * np.pi / cs.wavelength
    div = ops["Dfx"] @ hx + ops["Dfy"] @ hy
    ex = (beta ** 2 * hy - ops["Dby"] @ div) / (beta * omega * cs.eps_components["x"].ravel())
    ey = -(beta ** 2 * hx - ops["Dbx"] @ div) / (beta * omega * cs.eps_components["y"].ravel())
    return ex, ey


# ---------------------------------------------------------------------------
# Power pairing

def _check_same_grid(a: ModeField, b: ModeField) -> None:
    if a.grid_key != b.grid_key:
        raise GridMismatchError(f"grid mismatch: {a.grid_key} vs {b.grid_key}")
    if not np.isclose(a.wavelength, b.wavelength, rtol=0, atol=1e-9):
        raise GridMismatchError(f"wavelength mismatch: {a.wavelength} vs {b.wavelength}")


def cross_power(a: ModeField, b: ModeField) -> complex:
    """1/2 sum (E_a x H_b*) . z dA"""
    return 0.5 * complex(np.sum(a.ex * np.conj(b.hy) - a.ey * np.conj(b.hx))) * a.dx * a.dy


def mode_power(mode: ModeField) -> float:
    """Power flux carried by a field"""
    return float(np.real(cross_power(mode, mode)))


def normalize(mode: GuidedMode) -> GuidedMode:
    """
    Scale a mode to unit power with a deterministic phase.

    The phase is fixed so the largest H component sample is real positive,
    which makes normalization idempotent and invariant to input scaling.
    """
    power = mode_power(mode)
    if not np.isfinite(power) or power <= 0.0:
        raise SolverError(f"cannot normalize a field with power {power}")
    stacked = np.concatenate((mode.hx.ravel(), mode.hy.ravel()))
    peak = stacked[np.argmax(np.abs(stacked))]
    phase = np.conj(peak) / abs(peak) if abs(peak) > 0 else 1.0
    out = mode.scaled(phase / np.sqrt(power))
    if np.all(np.isreal(mode.hx)) and np.all(np.isreal(mode.hy)):
        out.ex, out.ey, out.hx, out.hy = (np.real(out.ex), np.real(out.ey),
                                          np.real(out.hx), np.real(out.hy))
    return out


def mode_overlap(a: ModeField, b: ModeField) -> float:
    """
    Power overlap |<a|b>|^2 between two fields on the same grid.

    Re[<a|b><b|a>] / (P_a P_b), clipped to [0, 1]; symmetric in its arguments
    and 1 for a field with itself.
    """
    _check_same_grid(a, b)
    pa, pb = mode_power(a), mode_power(b)
    if pa <= 0 or pb <= 0:
        raise SolverError("overlap of a field without forward power")
    value = np.real(cross_power(a, b) * cross_power(b, a)) / (pa * pb)
    return float(np.clip(value, 0.0, 1.0))


def projection(field_in: ModeField, mode: ModeField) -> complex:
    """Expansion coefficient of `field_in` on `mode` (mode need not be normalized)"""
    _check_same_grid(field_in, mode)
    p = mode_power(mode)
    return 0.5 * (cross_power(field_in, mode) + np.conj(cross_power(mode, field_in))) / p


def superpose(modes: Sequence[ModeField], amplitudes: Sequence[complex]) -> ModeField:
    """Coherent sum of modes with the given complex amplitudes"""
    if len(modes) == 0 or len(modes) != len(amplitudes):
        raise SolverError("superpose needs one amplitude per mode")
    first = modes[0]
    ex = np.zeros(first.hx.shape, dtype=complex)
    ey, hx, hy = ex.copy(), ex.copy(), ex.copy()
    for mode, amp in zip(modes, amplitudes):
        _check_same_grid(first, mode)
        ex += amp * mode.ex
        ey += amp * mode.ey
        hx += amp * mode.hx
        hy += amp * mode.hy
    return ModeField(ex, ey, hx, hy, first.dx, first.dy, first.wavelength)


def power_fraction(mode: ModeField, mask: np.ndarray) -> float:
    """Fraction of the power flux carried inside a boolean cell mask"""
    density = 0.5 * np.real(mode.ex * np.conj(mode.hy) - mode.ey * np.conj(mode.hx))
    total = float(np.sum(density))
    return float(np.sum(density[mask]) / total) if total > 0 else 0.0


def fundamental_te(modes: Sequence[GuidedMode]) -> GuidedMode:
    """Highest-index TE-like (te_fraction > 0.5) mode of a list"""
    te = [m for m in modes if m.te_fraction > 0.5]
    if not te:
        raise NoGuidedModeError("no TE-like mode among the solved modes")
    return max(te, key=lambda m: m.n_eff)


# ---------------------------------------------------------------------------
# Eigensolve

def _decayed(cs: CrossSection, hx: np.ndarray, hy: np.ndarray) -> bool:
    mag = np.sqrt(np.abs(hx) ** 2 + np.abs(hy) ** 2)
    peak = mag.max()
    edges = [mag[:, 0], mag[:, -1]]
    if not cs.periodic_x:
        edges += [mag[0, :], mag[-1, :]]
    return max(float(e.max()) for e in edges) < DECAY_TOL * peak


def _split_degenerate(modes: List[GuidedMode]) -> List[GuidedMode]:
    """Rotate (near-)degenerate pairs into the polarization-resolved basis"""
    out = list(modes)
    i = 0
    while i < len(out) - 1:
        a, b = out[i], out[i + 1]
        if abs(a.n_eff - b.n_eff) < DEGENERACY_TOL:
            ex = np.stack((a.ex.ravel(), b.ex.ravel()))
            gram = np.real(ex @ np.conj(ex.T))
            _, vecs = np.linalg.eigh(gram)
            rotated = []
            for c0, c1 in vecs.T[::-1]:
                combo = GuidedMode(
                    c0 * a.ex + c1 * b.ex, c0 * a.ey + c1 * b.ey,
                    c0 * a.hx + c1 * b.hx, c0 * a.hy + c1 * b.hy,
                    a.dx, a.dy, a.wavelength,
                    n_eff=0.5 * (a.n_eff + b.n_eff),
                    residual=max(a.residual, b.residual),
                    domain_ok=a.domain_ok and b.domain_ok,
                )
                rotated.append(normalize(combo))
            out[i], out[i + 1] = rotated
            i += 2
        else:
            i += 1
    return out


def solve_modes(
    cs: CrossSection,
    n_modes: int = 2,
    n_eff_guess: Optional[float] = None,
    tol: float = 0.0,
    maxiter: Optional[int] = None,
) -> List[GuidedMode]:
    """
    Guided modes of a cross-section nearest to an effective-index guess.

    Args:
        cs: Cross-section to solve
        n_modes: Number of eigenpairs requested
        n_eff_guess: Shift target; defaults per guide selector
        tol: ARPACK tolerance (0 = machine precision)
        maxiter: ARPACK iteration cap

    Returns:
        Up to n_modes normalized guided modes sorted by descending n_eff
    """
    if n_modes < 1:
        raise SolverError(f"n_modes must be >= 1, got {n_modes}")
    guess = DEFAULT_GUESS[cs.which] if n_eff_guess is None else float(n_eff_guess)
    guess = min(guess, cs.max_index) if n_eff_guess is None else guess
    n_bg = cs.materials.n_background
    if not n_bg < guess <= cs.max_index + 1e-12:
        raise SolverError(f"n_eff_guess {guess} outside ({n_bg}, {cs.max_index:.4f}]")

    k0 = 2.0 * np.pi / cs.wavelength
    ops = derivative_operators(cs)
    A = build_operator(cs, ops)
    size = A.shape[0]
    k = min(n_modes, size - 2)
    v0 = np.random.default_rng(0).standard_normal(size)

    try:
        values, vectors = eigs(A, k=k, sigma=(k0 * guess) ** 2, which="LM", v0=v0,
                               tol=tol, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        raise EigenSolverError(f"eigensolver did not converge for {cs.which.value} section") from exc
    except ArpackError as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc

    npts = cs.nx * cs.ny
    modes: List[GuidedMode] = []
    for lam, vec in zip(values, vectors.T):
        lam = float(np.real(lam))
        if lam <= (k0 * n_bg) ** 2:
            continue
        n_eff = np.sqrt(lam) / k0
        if n_eff >= cs.max_index:
            continue
        residual = float(np.linalg.norm(A @ vec - lam * vec) / np.linalg.norm(lam * vec))
        if residual > RESIDUAL_TOL:
            raise EigenSolverError(f"mode n_eff={n_eff:.6f} not converged", residual)

        vec = vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))]))
        vec = np.real(vec)
        hx, hy = vec[:npts], vec[npts:]
        beta = k0 * n_eff
        ex, ey = _e_from_h(cs, ops, hx, hy, beta)
        shape = (cs.nx, cs.ny)
        hx2, hy2 = hx.reshape(shape), hy.reshape(shape)
        domain_ok = _decayed(cs, hx2, hy2)
        if not domain_ok:
            warnings.warn(
                f"mode n_eff={n_eff:.5f} has not decayed at the domain edge; enlarge the padding",
                DomainTooSmallWarning,
            )
        mode = GuidedMode(ex.reshape(shape), ey.reshape(shape), hx2, hy2, cs.dx, cs.dy,
                          cs.wavelength, n_eff=float(n_eff), residual=residual, domain_ok=domain_ok)
        modes.append(normalize(mode))

    if not modes:
        raise NoGuidedModeError(f"no guided mode found near n_eff = {guess}")
    modes.sort(key=lambda m: m.n_eff, reverse=True)
    modes = _split_degenerate(modes)
    logger.info("solved %s section: n_eff = %s", cs.which.value,
                ", ".join(f"{m.n_eff:.5f}" for m in modes))
    return modes


# ---------------------------------------------------------------------------
# Dispersion sweeps

@dataclass
class DispersionBranch:
    """One continuous supermode branch versus a sweep parameter"""
    branch_id: int
    parameter: np.ndarray
    n_eff: np.ndarray
    te_fraction: np.ndarray
    modes: Optional[List[GuidedMode]] = field(default=None, repr=False)

    def __post_init__(self):
        self.parameter = np.asarray(self.parameter, dtype=float)
        self.n_eff = np.asarray(self.n_eff, dtype=float)
        self.te_fraction = np.asarray(self.te_fraction, dtype=float)
        if not (len(self.parameter) == len(self.n_eff) == len(self.te_fraction)):
            raise SolverError("branch arrays must have equal length")

    def __len__(self) -> int:
        return len(self.parameter)


def track_branches(
    per_point: Sequence[Sequence[GuidedMode]],
    parameters: Sequence[float],
    keep_modes: bool = False,
) -> List[DispersionBranch]:
    """
    Link modes at consecutive sweep points into branches by field identity.

    Pairs are matched greedily, largest overlap first; a pairing needs an
    overlap above 0.5, otherwise the branch ends and a new one starts. When a
    competing pairing lies within 0.01 of the best overlap the match is
    flagged and the candidate with the nearest n_eff wins.

    Args:
        per_point: Mode lists, one per parameter value
        parameters: Strictly monotone sweep parameter
        keep_modes: Store mode snapshots on the branches

    Returns:
        Branches ordered by creation
    """
    params = np.asarray(parameters, dtype=float)
    if len(params) < 2 or len(per_point) != len(params):
        raise SolverError("track_branches needs >= 2 points and one mode list per point")
    steps = np.diff(params)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise SolverError("sweep parameter must be strictly monotone")

    # each track: list of (point index, mode)
    tracks: List[List[Tuple[int, GuidedMode]]] = [[(0, m)] for m in per_point[0]]
    active = list(range(len(tracks)))

    for p in range(1, len(params)):
        current = per_point[p]
        overlaps = np.array([[mode_overlap(tracks[t][-1][1], m) for m in current] for t in active])
        assigned_tracks, assigned_modes = set(), set()
        pairs = sorted(((overlaps[i, j], i, j) for i in range(len(active)) for j in range(len(current))),
                       reverse=True)
        for value, i, j in pairs:
            if value <= CONTINUITY_MIN:
                break
            if i in assigned_tracks or j in assigned_modes:
                continue
            rivals = [(v, ii, jj) for v, ii, jj in pairs
                      if (ii == i or jj == j) and ii not in assigned_tracks
                      and jj not in assigned_modes and v > CONTINUITY_MIN
                      and value - v <= AMBIGUITY_WINDOW]
            if len(rivals) > 1:
                warnings.warn(
                    f"ambiguous branch match at parameter {params[p]:g} (overlaps {value:.4f})",
                    AmbiguousMatchWarning,
                )
                _, i, j = min(rivals, key=lambda r: abs(tracks[active[r[1]]][-1][1].n_eff
                                                        - current[r[2]].n_eff))
            assigned_tracks.add(i)
            assigned_modes.add(j)
            tracks[active[i]].append((p, current[j]))

        still_active = [active[i] for i in range(len(active)) if i in assigned_tracks]
        for j, mode in enumerate(current):
            if j not in assigned_modes:
                tracks.append([(p, mode)])
                still_active.append(len(tracks) - 1)
        active = still_active

    branches = []
    for branch_id, track in enumerate(tracks):
        idx = [p for p, _ in track]
        modes = [m for _, m in track]
        branches.append(DispersionBranch(
            branch_id=branch_id,
            parameter=params[idx],
            n_eff=[m.n_eff for m in modes],
            te_fraction=[m.te_fraction for m in modes],
            modes=modes if keep_modes else None,
        ))
    return branches


def _solve_point(width, geom, materials, which, n_modes, resolution, n_eff_guess,
                 padding, min_feature_cells):
    cs = build_cross_section(geom.with_width(width), materials, resolution, which,
                             padding=padding, min_feature_cells=min_feature_cells)
    try:
        return solve_modes(cs, n_modes=n_modes, n_eff_guess=n_eff_guess)
    except SolverError as exc:
        exc.width_nm = float(width)
        exc.args = (f"w = {width:g} nm: {exc.args[0] if exc.args else exc}",)
        raise


def solve_widths(
    widths: Sequence[float],
    geom: CouplerGeometry,
    materials: MaterialSet,
    which=GuideSelector.COUPLED,
    n_modes: int = 4,
    resolution: float = DEFAULT_RESOLUTION_NM,
    n_eff_guess: Optional[float] = None,
    padding: float = DEFAULT_PADDING_NM,
    min_feature_cells: int = MIN_FEATURE_CELLS,
    n_jobs: int = 1,
) -> List[List[GuidedMode]]:
    """
    Mode lists at every width, in input order.

    The grid is shared by every point: when the narrowest width is too small
    for the requested resolution the whole sweep is refined to resolve it.
    The fiber-only section does not depend on the width and is solved once.
    """
    which = GuideSelector.parse(which)
    widths = np.asarray(widths, dtype=float)
    if len(widths) == 0:
        raise SolverError("empty width list")
    if which != GuideSelector.FIBER:
        finest = min(widths.min(), geom.wg_thickness) / min_feature_cells
        if finest < resolution:
            logger.info("refining sweep grid from %.2f nm to %.3f nm to resolve w = %.0f nm",
                        resolution, finest, widths.min())
            resolution = finest

    args = (geom, materials, which, n_modes, resolution, n_eff_guess, padding, min_feature_cells)
    if which == GuideSelector.FIBER:
        modes = _solve_point(widths[0], *args)
        return [modes] * len(widths)
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_solve_point)(w, *args) for w in widths
    )


def sweep_width(
    widths: Sequence[float],
    geom: CouplerGeometry,
    materials: MaterialSet,
    which=GuideSelector.COUPLED,
    n_modes: int = 4,
    resolution: float = DEFAULT_RESOLUTION_NM,
    n_eff_guess: Optional[float] = None,
    padding: float = DEFAULT_PADDING_NM,
    min_feature_cells: int = MIN_FEATURE_CELLS,
    n_jobs: int = 1,
    keep_modes: bool = False,
) -> List[DispersionBranch]:
    """Effective-index branches versus waveguide width (see solve_widths for the grid)"""
    widths = np.asarray(widths, dtype=float)
    per_point = solve_widths(widths, geom, materials, which, n_modes, resolution, n_eff_guess,
                             padding, min_feature_cells, n_jobs)

    if len(widths) == 1:
        return [DispersionBranch(i, widths, [m.n_eff], [m.te_fraction],
                                 [m] if keep_modes else None)
                for i, m in enumerate(per_point[0])]
    return track_branches(per_point, widths, keep_modes=keep_modes)


def sweep_csv_rows(branches: Sequence[DispersionBranch]) -> List[Tuple[float, int, float, float]]:
    """Rows (width_nm, branch_id, n_eff, te_fraction) ordered by branch then width"""
    rows = []
    for branch in branches:
        for p, n, te in zip(branch.parameter, branch.n_eff, branch.te_fraction):
            rows.append((float(p), branch.branch_id, float(n), float(te)))
    return rows


def anticrossings(parameter: Sequence[float], upper: Sequence[float], lower: Sequence[float]) -> List[float]:
    """
    Parameter values of interior local minima of the gap between the two
    highest supermodes (n_eff,1 - n_eff,2).
    """
    gap = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    params = np.asarray(parameter, dtype=float)
    return [float(params[i]) for i in range(1, len(gap) - 1)
            if gap[i] < gap[i - 1] and gap[i] <= gap[i + 1]]


SWEEP_HEADER = ("width_nm", "branch_id", "n_eff", "te_fraction")


def write_sweep_csv(path, branches: Sequence[DispersionBranch]):
    """Write branches as `width_nm,branch_id,n_eff,te_fraction`"""
    return write_csv(path, SWEEP_HEADER, sweep_csv_rows(branches))


def write_field_csv(directory, mode: ModeField, prefix: str = "mode") -> List[Path]:
    """One CSV grid per transverse component (<prefix>_ex.csv, ...)"""
    paths = []
    for name in ("ex", "ey", "hx", "hy"):
        path = Path(directory) / f"{prefix}_{name}.csv"
        atomic_write_text(path, format_grid(getattr(mode, name)))
        paths.append(path)
    return paths
