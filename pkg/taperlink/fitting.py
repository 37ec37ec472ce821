"""
Fitting: weighted nonlinear least squares and the measurement models

Three models are provided with analytic Jacobians:

  g2(tau)  = B + sum_k A_k exp(-|tau - k T| / tau_peak)
             A_0 = g2_zero A,  A_k = A (1 + b exp(-|k| T / tau_blink))
  I(P)     = I_max (1 - exp(-P / P_sat))
  y(t)     = A exp(-gamma t) + B

Times are in ns, rates in 1/ns.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import least_squares

from taperlink.errors import (
    FitDivergenceError,
    FitError,
    FitIterationError,
    InputFormatError,
    NoPeakStructureError,
    NonDecayingError,
    SingularJacobianError,
)

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 500
FTOL = 1e-10
GTOL = 1e-8
REP_PERIOD_NS = 1e3 / 76.0
MIN_SPAN_PERIODS = 5
ENVELOPE_THRESHOLD = 0.05

G2_PARAMS = ("a_peak", "tau_peak", "blink_amp", "tau_blink", "g2_zero", "background")
SATURATION_PARAMS = ("i_max", "p_sat")
DECAY_PARAMS = ("amplitude", "rate", "background")

# Synthetic-data defaults; not measured values.
SYNTHETIC_G2 = {
    "a_peak": 1000.0,
    "tau_peak": 1.0 / 1.13,
    "blink_amp": 0.0,
    "tau_blink": REP_PERIOD_NS,
    "g2_zero": 0.20,
    "background": 20.0,
}


@dataclass
class FitResult:
    """Optimum, covariance and bookkeeping of one least-squares fit"""
    parameters: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    dof: int
    names: Tuple[str, ...] = ()

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def confidence_interval(self, index: int, level: float = 0.95) -> Tuple[float, float]:
        """Two-sided Student-t interval from the covariance diagonal"""
        half = stats.t.ppf(0.5 + level / 2.0, max(self.dof, 1)) * self.stderr[index]
        value = self.parameters[index]
        return (float(value - half), float(value + half))

    def as_dict(self) -> dict:
        names = self.names or tuple(f"p{i}" for i in range(len(self.parameters)))
        return {name: float(v) for name, v in zip(names, self.parameters)}


def poisson_weights(counts: np.ndarray) -> np.ndarray:
    """Inverse-variance weights 1 / max(count, 1)"""
    return 1.0 / np.maximum(np.asarray(counts, dtype=float), 1.0)


def nlls_fit(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    p0: Sequence[float],
    weights: Optional[np.ndarray] = None,
    bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    jacobian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    names: Sequence[str] = (),
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """
    Damped (Levenberg-Marquardt) weighted least-squares fit.

    Minimizes sum w (model(x, p) - y)^2. Convergence on relative cost
    decrease < 1e-10 or gradient norm < 1e-8. The covariance is
    (J^T W J)^-1 scaled by the reduced chi-square.

    Args:
        model: f(x, params) -> predictions
        x: Independent variable
        y: Observations
        p0: Initial parameters (inside bounds)
        weights: Inverse-variance weights; Poisson weights when omitted
        bounds: (lower, upper); unbounded fits use the MINPACK LM driver
        jacobian: df/dp(x, params) with shape (len(x), len(p)); finite
            differences when omitted
        names: Parameter names for reports
        max_iterations: Cap on function evaluations

    Returns:
        FitResult
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1D arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(p0))):
        raise FitError("data and initial parameters must be finite")
    if len(y) < len(p0):
        raise FitError(f"{len(y)} points cannot determine {len(p0)} parameters")
    w = poisson_weights(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise FitError("weights must be non-negative and match the data")
    sw = np.sqrt(w)

    if bounds is not None:
        lower, upper = (np.asarray(b, dtype=float) for b in bounds)
        if np.any(p0 < lower) or np.any(p0 > upper):
            raise FitError("initial parameters outside the bounds")

    def residuals(p):
        return sw * (model(x, p) - y)

    jac = "2-point"
    if jacobian is not None:
        def jac(p):
            return sw[:, None] * jacobian(x, p)

    cost0 = 0.5 * float(np.sum(residuals(p0) ** 2))
    options = dict(jac=jac, ftol=FTOL, gtol=GTOL, xtol=1e-15, max_nfev=max_iterations)
    if bounds is None:
        res = least_squares(residuals, p0, method="lm", **options)
    else:
        res = least_squares(residuals, p0, method="trf", bounds=bounds, x_scale="jac", **options)

    if res.status == 0:
        raise FitIterationError(f"no convergence within {max_iterations} evaluations")
    if res.status < 0 or not np.isfinite(res.cost) or res.cost > cost0 * (1 + 1e-12):
        raise FitDivergenceError(f"fit diverged: cost {res.cost:.4g} from {cost0:.4g} ({res.message})")

    J = res.jac
    _, s, vt = np.linalg.svd(J, full_matrices=False)
    tol = max(J.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if s.size < len(p0) or s[-1] <= tol:
        index = int(np.argmax(np.abs(vt[-1])))
        raise SingularJacobianError("Jacobian is rank deficient at the optimum", index)

    dof = len(y) - len(p0)
    variance = 2.0 * res.cost / dof if dof > 0 else 0.0
    covariance = (vt.T / s ** 2) @ vt * variance
    covariance = 0.5 * (covariance + covariance.T)
    iterations = res.njev if res.njev is not None else res.nfev
    logger.debug("fit converged in %d iterations (%s)", iterations, res.message)
    return FitResult(
        parameters=res.x,
        covariance=covariance,
        residual_norm=float(np.linalg.norm(res.fun)),
        converged=True,
        iterations=int(iterations),
        dof=dof,
        names=tuple(names),
    )


# ---------------------------------------------------------------------------
# g2

@dataclass
class G2Histogram:
    """Coincidence histogram versus delay"""
    tau: np.ndarray
    counts: np.ndarray
    rep_period: float = REP_PERIOD_NS

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.tau.shape != self.counts.shape or self.tau.ndim != 1:
            raise InputFormatError("tau and counts must have equal length")
        if self.rep_period <= 0:
            raise InputFormatError(f"rep_period must be positive, got {self.rep_period}")
        if np.any(np.diff(self.tau) <= 0):
            raise InputFormatError("tau must be strictly increasing")
        if np.any(self.counts < 0) or not np.all(np.isfinite(self.counts)):
            raise InputFormatError("counts must be finite and non-negative")

    @property
    def bin_width(self) -> float:
        return float(np.min(np.diff(self.tau)))

    def check_span(self, periods: int = MIN_SPAN_PERIODS) -> None:
        need = periods * self.rep_period
        if self.tau[0] > -need or self.tau[-1] < need:
            raise InputFormatError(f"histogram must span at least {periods} periods on each side of zero")


@dataclass
class G2Fit:
    """g2 fit summary; `result` carries the full parameter vector and covariance"""
    g2_zero: float
    g2_zero_ci: Tuple[float, float]
    g2_zero_area: float
    blink_amp: float
    blinking_amplitude: float
    preparation_efficiency: float
    tau_peak: float
    tau_blink: float
    result: FitResult

    @property
    def covariance(self) -> np.ndarray:
        return self.result.covariance


def _peak_orders(tau: np.ndarray, rep_period: float) -> np.ndarray:
    lo = int(np.floor(tau.min() / rep_period)) - 1
    hi = int(np.ceil(tau.max() / rep_period)) + 1
    return np.arange(lo, hi + 1)


def _check_g2_params(params, tau) -> None:
    _, tau_peak, _, tau_blink, _, _ = params
    if tau_peak <= 0 or tau_blink <= 0:
        raise FitError("peak and blinking times must be positive")
    if len(tau) > 1 and np.max(np.diff(tau)) > tau_peak / 2.0:
        raise FitError(f"bin width exceeds tau_peak/2 = {tau_peak / 2.0:.4g} ns; peaks unresolved")


def _g2_terms(params, tau, rep_period):
    a_peak, tau_peak, blink_amp, tau_blink, g2_zero, _ = params
    k = _peak_orders(tau, rep_period)
    dist = np.abs(tau[:, None] - k[None, :] * rep_period)
    shape = np.exp(-dist / tau_peak)
    envelope = np.where(k == 0, 0.0, np.exp(-np.abs(k) * rep_period / tau_blink))
    heights = np.where(k == 0, g2_zero * a_peak, a_peak * (1.0 + blink_amp * envelope))
    return k, dist, shape, envelope, heights


def model_g2(params: Sequence[float], tau: np.ndarray, rep_period: float = REP_PERIOD_NS) -> np.ndarray:
    """
    Pulsed-excitation coincidence model with a blinking envelope.

    Args:
        params: (a_peak, tau_peak, blink_amp, tau_blink, g2_zero, background)
        tau: Delays, ns
        rep_period: Excitation period, ns

    Returns:
        Expected counts per bin
    """
    tau = np.asarray(tau, dtype=float)
    _check_g2_params(params, tau)
    _, _, shape, _, heights = _g2_terms(params, tau, rep_period)
    return params[5] + shape @ heights


def jacobian_g2(params: Sequence[float], tau: np.ndarray, rep_period: float = REP_PERIOD_NS) -> np.ndarray:
    """d model_g2 / d params, shape (len(tau), 6)"""
    tau = np.asarray(tau, dtype=float)
    a_peak, tau_peak, blink_amp, tau_blink, g2_zero, _ = params
    k, dist, shape, envelope, heights = _g2_terms(params, tau, rep_period)
    zero = (k == 0)
    d_a = np.where(zero, g2_zero, 1.0 + blink_amp * envelope)
    d_envelope_dtb = envelope * np.abs(k) * rep_period / tau_blink ** 2
    jac = np.empty((len(tau), 6))
    jac[:, 0] = shape @ d_a
    jac[:, 1] = (shape * dist / tau_peak ** 2) @ heights
    jac[:, 2] = shape @ (a_peak * envelope)
    jac[:, 3] = shape @ (a_peak * blink_amp * d_envelope_dtb)
    jac[:, 4] = shape @ np.where(zero, a_peak, 0.0)
    jac[:, 5] = 1.0
    return jac


def synthesize_g2(
    params: Optional[Sequence[float]] = None,
    rep_period: float = REP_PERIOD_NS,
    n_periods: int = 20,
    bins_per_period: int = 658,
    noise: Optional[str] = None,
    rel_noise: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> G2Histogram:
    """
    Synthetic histogram from model_g2.

    Bins are centred so every peak sits on a bin centre. `noise` is None,
    'poisson' or 'gaussian' (relative sigma `rel_noise`).
    """
    params = [SYNTHETIC_G2[n] for n in G2_PARAMS] if params is None else list(params)
    bin_width = rep_period / bins_per_period
    half = n_periods * bins_per_period
    tau = np.arange(-half, half + 1) * bin_width
    counts = model_g2(params, tau, rep_period)
    if noise is not None:
        rng = rng or np.random.default_rng(0)
        if noise == "poisson":
            counts = rng.poisson(counts).astype(float)
        elif noise == "gaussian":
            counts = np.clip(counts + rng.normal(0.0, rel_noise * counts), 0.0, None)
        else:
            raise FitError(f"unknown noise model '{noise}'")
    return G2Histogram(tau, counts, rep_period)


def _background_estimate(hist: G2Histogram) -> float:
    """Median of the counts midway between peaks"""
    k = _peak_orders(hist.tau, hist.rep_period)
    mids = (k[:-1] + 0.5) * hist.rep_period
    mids = mids[(mids >= hist.tau[0]) & (mids <= hist.tau[-1])]
    idx = np.clip(np.searchsorted(hist.tau, mids), 0, len(hist.tau) - 1)
    return float(np.median(hist.counts[idx]))


def _peak_heights(hist: G2Histogram) -> Tuple[np.ndarray, np.ndarray]:
    k = _peak_orders(hist.tau, hist.rep_period)
    centres = k * hist.rep_period
    inside = (centres >= hist.tau[0]) & (centres <= hist.tau[-1])
    idx = np.clip(np.searchsorted(hist.tau, centres[inside]), 0, len(hist.tau) - 1)
    nearest = np.where(
        (idx > 0) & (np.abs(hist.tau[idx - 1] - centres[inside]) < np.abs(hist.tau[idx] - centres[inside])),
        idx - 1, idx,
    )
    return k[inside], hist.counts[nearest]


def _tau_floor(hist: G2Histogram) -> float:
    """Smallest peak width the binning resolves"""
    return 2.0 * float(np.max(np.diff(hist.tau)))


def _g2_initial(hist: G2Histogram) -> List[float]:
    background = _background_estimate(hist)
    k, heights = _peak_heights(hist)
    heights = heights - background
    far = np.abs(k) >= max(2, int(0.7 * np.abs(k).max()))
    a_peak = float(np.mean(heights[far])) if np.any(far) else float(heights.max())
    if a_peak <= 0:
        raise NoPeakStructureError("no peaks above background")
    near = heights[np.abs(k) == 1]
    blink_amp = max(float(np.mean(near)) / a_peak - 1.0, 0.0)
    tau_blink = hist.rep_period
    if blink_amp > 0:
        for order in range(1, int(np.abs(k).max()) + 1):
            excess = heights[np.abs(k) == order] / a_peak - 1.0
            if np.mean(excess) < blink_amp / np.e:
                tau_blink = order * hist.rep_period
                break
    g2_zero = max(float(np.mean(heights[k == 0])) / a_peak, 0.0)

    # width of the first side peak from its area
    window = np.abs(hist.tau - hist.rep_period) < hist.rep_period / 2.0
    area = float(np.sum(hist.counts[window] - background) * hist.bin_width)
    peak_height = float(np.mean(near)) if near.size else a_peak
    tau_peak = area / (2.0 * peak_height) if peak_height > 0 and area > 0 else hist.rep_period / 20.0
    tau_peak = float(np.clip(tau_peak, _tau_floor(hist), hist.rep_period / 4.0))
    return [a_peak, tau_peak, blink_amp, tau_blink, g2_zero, max(background, 0.0)]


def g2_area_method(
    hist: G2Histogram,
    half_window: float,
    k_min: int = 1,
    background: Optional[float] = None,
) -> float:
    """
    g2(0) as the background-subtracted area of the zero-delay peak over the
    mean area of the long-delay peaks (|k| >= k_min).

    Args:
        hist: Histogram
        half_window: Integration half-width around each peak, ns (< T/2)
        k_min: Smallest peak order counted as long delay
        background: Counts per bin to subtract; estimated between peaks if omitted

    Returns:
        g2(0) estimate
    """
    T = hist.rep_period
    if not 0 < half_window < T / 2.0:
        raise FitError(f"half_window must lie in (0, {T / 2.0:.3f}) ns")
    if k_min < 1:
        raise FitError("k_min must be >= 1")
    bg = _background_estimate(hist) if background is None else background

    def area(order: int) -> float:
        sel = np.abs(hist.tau - order * T) <= half_window
        return float(np.sum(hist.counts[sel] - bg))

    k_max = int(np.floor((min(-hist.tau[0], hist.tau[-1]) - half_window) / T))
    orders = [k for k in range(k_min, k_max + 1)]
    if 2 * len(orders) < 3:
        raise FitError(f"fewer than 3 long-delay peaks beyond |k| = {k_min}")
    reference = np.mean([area(k) for k in orders] + [area(-k) for k in orders])
    if reference <= 0:
        raise NoPeakStructureError("long-delay peaks have no area above background")
    return area(0) / reference


def envelope_k_min(blink_amp: float, tau_blink: float, rep_period: float,
                   threshold: float = ENVELOPE_THRESHOLD) -> int:
    """First peak order where the blinking excess b exp(-kT/tau_blink) is below threshold"""
    if blink_amp <= threshold:
        return 1
    return int(np.floor(np.log(blink_amp / threshold) * tau_blink / rep_period)) + 1


def fit_g2(
    hist: G2Histogram,
    half_window: Optional[float] = None,
    k_min: Optional[int] = None,
    weights: Optional[np.ndarray] = None,
    initial: Optional[Sequence[float]] = None,
    envelope_threshold: float = ENVELOPE_THRESHOLD,
) -> G2Fit:
    """
    Fit model_g2 to a histogram and evaluate the area estimate alongside.

    Without visible bunching of the near side peaks the blinking terms are
    held at zero, since tau_blink is then unidentifiable.
    """
    if np.ptp(hist.counts) == 0:
        raise NoPeakStructureError("histogram is flat")
    hist.check_span()
    T = hist.rep_period
    p0 = list(initial) if initial is not None else _g2_initial(hist)

    floor = _tau_floor(hist)
    with_blinking = p0[2] > ENVELOPE_THRESHOLD
    if with_blinking:
        lower = [-np.inf, floor, -np.inf, floor, -np.inf, -np.inf]
        result = nlls_fit(lambda t, p: model_g2(p, t, T), hist.tau, hist.counts, p0, weights=weights,
                          bounds=(lower, [np.inf] * 6),
                          jacobian=lambda t, p: jacobian_g2(p, t, T), names=G2_PARAMS)
    else:
        free = [0, 1, 4, 5]

        def full(p):
            q = np.zeros(6)
            q[free] = p
            q[3] = T
            return q

        reduced = nlls_fit(lambda t, p: model_g2(full(p), t, T), hist.tau, hist.counts,
                           [p0[i] for i in free], weights=weights,
                           bounds=([-np.inf, floor, -np.inf, -np.inf], [np.inf] * 4),
                           jacobian=lambda t, p: jacobian_g2(full(p), t, T)[:, free],
                           names=tuple(G2_PARAMS[i] for i in free))
        covariance = np.zeros((6, 6))
        covariance[np.ix_(free, free)] = reduced.covariance
        result = FitResult(full(reduced.parameters), covariance, reduced.residual_norm,
                           reduced.converged, reduced.iterations, reduced.dof, G2_PARAMS)

    params = result.parameters
    lo, hi = result.confidence_interval(4)
    g2_zero = max(float(params[4]), 0.0)
    blink_amp = max(float(params[2]), 0.0)
    if k_min is None:
        k_min = envelope_k_min(blink_amp, float(params[3]), T, envelope_threshold)
    if half_window is None:
        half_window = min(3.0 * float(params[1]), 0.45 * T)
    area = g2_area_method(hist, half_window, k_min=k_min)
    fit = G2Fit(
        g2_zero=g2_zero,
        g2_zero_ci=(max(lo, 0.0), max(hi, 0.0)),
        g2_zero_area=float(area),
        blink_amp=blink_amp,
        blinking_amplitude=blink_amp / (1.0 + blink_amp),
        preparation_efficiency=1.0 / (1.0 + blink_amp),
        tau_peak=float(params[1]),
        tau_blink=float(params[3]) if with_blinking else float("nan"),
        result=result,
    )
    logger.info("g2 fit: g2(0) = %.4f [%.4f, %.4f], area %.4f, preparation %.4f",
                fit.g2_zero, *fit.g2_zero_ci, fit.g2_zero_area, fit.preparation_efficiency)
    return fit


# ---------------------------------------------------------------------------
# Saturation

def model_saturation(params: Sequence[float], power: np.ndarray) -> np.ndarray:
    i_max, p_sat = params
    return i_max * (1.0 - np.exp(-np.asarray(power, dtype=float) / p_sat))


def jacobian_saturation(params: Sequence[float], power: np.ndarray) -> np.ndarray:
    i_max, p_sat = params
    power = np.asarray(power, dtype=float)
    e = np.exp(-power / p_sat)
    return np.column_stack((1.0 - e, -i_max * e * power / p_sat ** 2))


def saturation_level(power, p_sat: float):
    """Fraction 1 - exp(-P/P_sat) of the maximum count rate"""
    return 1.0 - np.exp(-np.asarray(power, dtype=float) / p_sat)


def power_for_level(level: float, p_sat: float) -> float:
    """Pump power reaching a saturation level in [0, 1)"""
    if not 0.0 <= level < 1.0:
        raise FitError(f"saturation level must lie in [0, 1), got {level}")
    return float(-p_sat * np.log1p(-level))


@dataclass
class SaturationFit:
    i_max: float
    p_sat: float
    covariance: np.ndarray
    result: FitResult = field(repr=False)

    def saturation_level(self, power):
        return saturation_level(power, self.p_sat)

    def power_for_level(self, level: float) -> float:
        return power_for_level(level, self.p_sat)


def fit_saturation(power: np.ndarray, counts: np.ndarray, weights: Optional[np.ndarray] = None) -> SaturationFit:
    """Fit I = I_max (1 - exp(-P/P_sat))"""
    power = np.asarray(power, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(power) < 3:
        raise FitError("saturation fit needs at least 3 points")
    if np.any(power < 0):
        raise FitError("pump powers must be non-negative")
    if np.ptp(power) == 0:
        raise FitError("all pump powers are equal")
    p0 = [1.1 * float(counts.max()), float(np.median(power[power > 0])) if np.any(power > 0) else 1.0]
    result = nlls_fit(lambda p, q: model_saturation(q, p), power, counts, p0, weights=weights,
                      jacobian=lambda p, q: jacobian_saturation(q, p), names=SATURATION_PARAMS)
    i_max, p_sat = result.parameters
    if i_max <= 0 or p_sat <= 0:
        raise FitDivergenceError(f"unphysical saturation parameters I_max={i_max:.4g}, P_sat={p_sat:.4g}")
    logger.info("saturation fit: I_max = %.5g, P_sat = %.5g", i_max, p_sat)
    return SaturationFit(float(i_max), float(p_sat), result.covariance, result)


# ---------------------------------------------------------------------------
# Decay

def model_decay(params: Sequence[float], t: np.ndarray) -> np.ndarray:
    amplitude, rate, background = params
    return amplitude * np.exp(-rate * np.asarray(t, dtype=float)) + background


def jacobian_decay(params: Sequence[float], t: np.ndarray) -> np.ndarray:
    amplitude, rate, _ = params
    t = np.asarray(t, dtype=float)
    e = np.exp(-rate * t)
    return np.column_stack((e, -amplitude * t * e, np.ones_like(t)))


@dataclass
class DecayFit:
    rate: float
    rate_ci: Tuple[float, float]
    amplitude: float
    background: float
    result: FitResult = field(repr=False)

    @property
    def lifetime(self) -> float:
        return 1.0 / self.rate


def fit_decay(t: np.ndarray, counts: np.ndarray, weights: Optional[np.ndarray] = None) -> DecayFit:
    """Single exponential plus flat background; rate in 1/ns"""
    t = np.asarray(t, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(t) < 10:
        raise FitError("decay fit needs at least 10 points")
    if np.ptp(counts) == 0:
        raise NonDecayingError("trace is constant")
    order = np.argsort(t)
    t, counts = t[order], counts[order]
    if weights is not None:
        weights = np.asarray(weights, dtype=float)[order]

    tail = max(len(t) // 10, 1)
    background = float(np.mean(counts[-tail:]))
    amplitude = float(counts[0] - background)
    if amplitude <= 0:
        raise NonDecayingError("trace does not fall from its start")
    above = counts - background
    head = above > 0.2 * amplitude
    n_head = max(int(np.argmin(head)) if not head.all() else len(t), 2)
    slope = np.polyfit(t[:n_head], np.log(np.maximum(above[:n_head], 1e-300)), 1)[0]
    rate0 = -slope if slope < 0 else 1.0 / np.ptp(t)

    result = nlls_fit(lambda x, p: model_decay(p, x), t, counts, [amplitude, rate0, background],
                      weights=weights, jacobian=lambda x, p: jacobian_decay(p, x), names=DECAY_PARAMS)
    amplitude, rate, background = result.parameters
    if rate <= 0 or amplitude <= 0:
        raise NonDecayingError(f"fitted rate {rate:.4g} /ns does not describe a decay")
    if np.ptp(t) * rate < 2.0:
        raise FitError("trace spans fewer than two decay times")
    logger.info("decay fit: rate = %.5g /ns", rate)
    return DecayFit(float(rate), result.confidence_interval(1), float(amplitude), float(background), result)
