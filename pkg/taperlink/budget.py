"""
Budget: efficiency-chain arithmetic with uncertainty propagation

Values carry one-standard-deviation absolute uncertainties. Single-input
relations (square roots, corrections) are propagated to first order with the
`uncertainties` package; chains of independent stages combine their relative
sigmas in quadrature.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from uncertainties import ufloat, umath

from taperlink.errors import (
    BudgetError,
    ExpectationDeviationWarning,
    NoSinglePhotonContentError,
    NonPhysicalBetaError,
    UnphysicalEfficiencyWarning,
)

logger = logging.getLogger(__name__)

DEFAULT_REP_RATE_MHZ = 76.0
DEFAULT_INTERFACE_TRANSMISSION = 0.88
EXPECTED_RATE_LINE = "Expected detector rate"


@dataclass(frozen=True)
class Measured:
    """A value with its one-sigma absolute uncertainty"""
    value: float
    sigma: float = 0.0
    label: str = ""
    unit: str = ""

    def __post_init__(self):
        if not np.isfinite(self.value) or not np.isfinite(self.sigma):
            raise BudgetError(f"{self.label or 'value'} must be finite")
        if self.sigma < 0:
            raise BudgetError(f"{self.label or 'value'}: sigma must be >= 0, got {self.sigma}")

    @property
    def relative_sigma(self) -> float:
        return self.sigma / abs(self.value) if self.value != 0 else 0.0

    def as_ufloat(self):
        return ufloat(self.value, self.sigma, self.label or None)

    @classmethod
    def from_ufloat(cls, u, label: str = "", unit: str = "") -> "Measured":
        return cls(float(u.nominal_value), float(u.std_dev), label, unit)

    @classmethod
    def parse(cls, text, label: str = "", unit: str = "") -> "Measured":
        """Accept '0.821 ± 0.018', '0.821 +/- 0.018', [value, sigma] or a bare number"""
        if isinstance(text, (list, tuple)):
            if len(text) != 2:
                raise BudgetError(f"{label}: expected [value, sigma], got {text!r}")
            return cls(float(text[0]), float(text[1]), label, unit)
        if isinstance(text, (int, float)):
            return cls(float(text), 0.0, label, unit)
        raw = str(text).replace("+/-", "±").replace("+-", "±")
        parts = raw.split("±")
        try:
            if len(parts) == 1:
                return cls(float(parts[0]), 0.0, label, unit)
            if len(parts) == 2:
                return cls(float(parts[0]), float(parts[1]), label, unit)
        except ValueError:
            pass
        raise BudgetError(f"{label}: cannot read measured value {text!r}")

    def __str__(self) -> str:
        return f"{self.value:.4g} ± {self.sigma:.2g}{' ' + self.unit if self.unit else ''}"


@dataclass
class EfficiencyChain:
    """Ordered independent stages and their product"""
    stages: List[Measured]
    product: Measured

    def __len__(self) -> int:
        return len(self.stages)


def _check_efficiency(m: Measured, name: str) -> None:
    if not 0.0 < m.value <= 1.0:
        raise BudgetError(f"{m.label or name} must lie in (0, 1], got {m.value}")


def extract_eta_cf(p_r: float, p_i: float, eta_fbs: Measured,
                   sigma_p_r: float = 0.0, sigma_p_i: float = 0.0) -> Measured:
    """
    One-way chip-to-fiber efficiency sqrt(P_R / (P_I eta_FBS)) from a
    reflection measurement.

    A ratio above one cannot come from a passive reflector; the value is
    returned with an UnphysicalEfficiencyWarning.
    """
    if p_r < 0 or p_i < 0:
        raise BudgetError("powers must be non-negative")
    if p_i == 0:
        raise BudgetError("input power P_I must be positive")
    _check_efficiency(eta_fbs, "eta_fbs")
    ratio = ufloat(p_r, sigma_p_r) / (ufloat(p_i, sigma_p_i) * eta_fbs.as_ufloat())
    if ratio.nominal_value > 1.0:
        message = f"P_R/(P_I eta_FBS) = {ratio.nominal_value:.4f} > 1: reflector gain is unphysical"
        logger.warning(message)
        warnings.warn(message, UnphysicalEfficiencyWarning)
    if ratio.nominal_value == 0:
        return Measured(0.0, 0.0, "eta_CF")
    return Measured.from_ufloat(umath.sqrt(ratio), "eta_CF")


def extract_eta_cf_spectrum(wavelength: np.ndarray, p_r: np.ndarray, p_i: np.ndarray,
                            eta_fbs: np.ndarray) -> List[Tuple[float, float]]:
    """Element-wise eta_CF over a spectrum; rows (lambda_nm, eta_CF)"""
    arrays = [np.asarray(a, dtype=float) for a in (wavelength, p_r, p_i, eta_fbs)]
    if len({a.shape for a in arrays}) != 1:
        raise BudgetError("spectral columns must have equal length")
    rows = []
    for lam, r, i, fbs in zip(*arrays):
        rows.append((float(lam), extract_eta_cf(r, i, Measured(fbs, 0.0, "eta_FBS")).value))
    return rows


def one_way_fiber(t_total: Measured) -> Measured:
    """Single-pass transmission sqrt(T) of a symmetric round trip"""
    if t_total.value <= 0 or t_total.value > 1.0:
        raise BudgetError(f"fiber transmission must lie in (0, 1], got {t_total.value}")
    return Measured.from_ufloat(umath.sqrt(t_total.as_ufloat()), "one-way fiber")


def correct_fiber_loss(eta_cf: Measured, one_way: Measured) -> Measured:
    """eta_CF with one fiber passage divided out"""
    _check_efficiency(one_way, "one-way fiber transmission")
    return Measured.from_ufloat(eta_cf.as_ufloat() / one_way.as_ufloat(), "eta_CF corrected")


def remove_interface(eta_cf: Measured, interface_transmission: float = DEFAULT_INTERFACE_TRANSMISSION) -> Measured:
    """
    One-way taper efficiency when the measured reflection path also crosses a
    device interface of transmission T twice (eta / T).
    """
    if not 0 < interface_transmission <= 1:
        raise BudgetError(f"interface transmission must lie in (0, 1], got {interface_transmission}")
    return Measured.from_ufloat(eta_cf.as_ufloat() / interface_transmission, "eta_CF without interface")


def pure_single_photon_rate(rate_snspd: Measured, g2_zero: Measured) -> Measured:
    """Rate times sqrt(1 - g2(0)), assuming Poissonian background"""
    if g2_zero.value >= 1.0:
        raise NoSinglePhotonContentError(f"g2(0) = {g2_zero.value} leaves no single-photon content")
    if g2_zero.value < 0:
        raise BudgetError(f"g2(0) must be >= 0, got {g2_zero.value}")
    result = rate_snspd.as_ufloat() * umath.sqrt(1.0 - g2_zero.as_ufloat())
    return Measured.from_ufloat(result, "single-photon rate", rate_snspd.unit)


def chain(stages: Sequence[Measured]) -> EfficiencyChain:
    """
    Product of independent stages with relative sigmas in quadrature:
    (s_p / p)^2 = sum (s_i / v_i)^2.
    """
    stages = list(stages)
    if not stages:
        raise BudgetError("efficiency chain is empty")
    for s in stages:
        if s.value <= 0:
            raise BudgetError(f"stage {s.label or '?'} must be positive, got {s.value}")
    product = float(np.prod([s.value for s in stages]))
    relative = float(np.sqrt(np.sum([s.relative_sigma ** 2 for s in stages])))
    return EfficiencyChain(stages, Measured(product, abs(product) * relative, "product"))


def source_efficiency(rate_sp: Measured, offchip: EfficiencyChain,
                      rep_rate: float = DEFAULT_REP_RATE_MHZ) -> Tuple[Measured, Measured]:
    """
    Photons in the fiber per second and per excitation pulse.

    Returns:
        (fiber rate, source efficiency), both with quadrature sigmas
    """
    if rep_rate <= 0:
        raise BudgetError(f"repetition rate must be positive, got {rep_rate}")
    _check_efficiency(offchip.product, "off-chip product")
    fiber = chain([rate_sp] + offchip.stages)
    relative = fiber.product.relative_sigma
    value = rate_sp.value / offchip.product.value
    fiber_rate = Measured(value, abs(value) * relative, "single photons in the fiber", rate_sp.unit)
    efficiency = Measured(value / rep_rate, abs(value / rep_rate) * relative, "source efficiency")
    return fiber_rate, efficiency


def expected_detector_rate(onchip: EfficiencyChain, eta_cf: Measured, offchip: EfficiencyChain,
                           rep_rate: float = DEFAULT_REP_RATE_MHZ) -> Measured:
    """rep_rate x on-chip x eta_CF x off-chip"""
    if rep_rate <= 0:
        raise BudgetError(f"repetition rate must be positive, got {rep_rate}")
    for m, name in ((onchip.product, "on-chip product"), (eta_cf, "eta_CF"), (offchip.product, "off-chip product")):
        _check_efficiency(m, name)
    total = chain([onchip.product, eta_cf, offchip.product])
    value = rep_rate * total.product.value
    return Measured(value, rep_rate * total.product.sigma, "expected detector rate", "MHz")


def beta_factor(gamma_total: float, gamma_ref: float,
                sigma_total: float = 0.0, sigma_ref: float = 0.0) -> Measured:
    """beta = 1 - gamma_ref / gamma_total"""
    if gamma_total <= 0 or gamma_ref < 0:
        raise BudgetError("decay rates must be positive")
    if gamma_ref >= gamma_total:
        raise NonPhysicalBetaError(f"gamma_ref = {gamma_ref} is not below gamma_total = {gamma_total}")
    beta = 1.0 - ufloat(gamma_ref, sigma_ref) / ufloat(gamma_total, sigma_total)
    return Measured.from_ufloat(beta, "beta")


def monte_carlo_sigma(
    func: Callable[..., np.ndarray],
    inputs: Sequence[Measured],
    n_samples: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """
    Mean and standard deviation of func(*samples) with independent Gaussian inputs.

    `func` receives one sample array per input and must be vectorized.
    """
    if n_samples < 2:
        raise BudgetError("n_samples must be >= 2")
    rng = rng or np.random.default_rng(0)
    samples = [rng.normal(m.value, m.sigma, n_samples) for m in inputs]
    out = np.asarray(func(*samples), dtype=float)
    return float(np.mean(out)), float(np.std(out, ddof=1))


# ---------------------------------------------------------------------------
# Report

@dataclass
class BudgetReport:
    """Evaluated budget with ordered report lines"""
    lines: List[Tuple[str, Measured]]
    deviations: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def value(self, name: str) -> Measured:
        for key, m in self.lines:
            if key == name:
                return m
        raise KeyError(name)

    def to_text(self) -> str:
        width = max(len(name) for name, _ in self.lines)
        out = []
        for name, m in self.lines:
            if m.unit == "%":
                text = f"{100 * m.value:.1f} % ± {100 * m.sigma:.1f} %"
            elif m.unit:
                text = f"{m.value:.2f} {m.unit} ± {m.sigma:.2f} {m.unit}"
            else:
                text = f"{m.value:.4f} ± {m.sigma:.4f}"
            flag = "  (differs from reference)" if name in self.deviations else ""
            out.append(f"{name.ljust(width)}  {text}{flag}")
        return "\n".join(out) + "\n"

    def to_rows(self) -> List[Tuple[str, float, float, str]]:
        return [(name, m.value, m.sigma, m.unit) for name, m in self.lines]


def _percent(m: Measured, label: str) -> Measured:
    return Measured(m.value, m.sigma, label, "%")


def budget_report(
    rate_sp: Measured,
    offchip: Dict[str, Measured],
    onchip: Optional[Dict[str, Measured]] = None,
    eta_cf: Optional[Measured] = None,
    rep_rate: float = DEFAULT_REP_RATE_MHZ,
    reference: Optional[Dict[str, float]] = None,
    rel_tolerance: float = 0.01,
) -> BudgetReport:
    """
    Table-style efficiency budget.

    Off-chip stages convert the detected single-photon rate to the rate in
    the fiber and the source efficiency; on-chip stages and eta_CF, when
    given, add the expected detector rate. Values in `reference` (keyed by
    report line) that differ by more than `rel_tolerance` are flagged with an
    ExpectationDeviationWarning.
    """
    lines: List[Tuple[str, Measured]] = []
    lines.append(("Single photons on detector", Measured(rate_sp.value, rate_sp.sigma, "", "MHz")))
    for name, m in offchip.items():
        lines.append((name, _percent(m, name)))
    off = chain(list(offchip.values()))
    lines.append(("Off-chip efficiency", _percent(off.product, "off-chip")))
    fiber_rate, efficiency = source_efficiency(rate_sp, off, rep_rate)
    lines.append(("Single photons in the fiber", Measured(fiber_rate.value, fiber_rate.sigma, "", "MHz")))
    lines.append(("Source efficiency", _percent(efficiency, "source efficiency")))
    if onchip:
        for name, m in onchip.items():
            lines.append((name, _percent(m, name)))
        on = chain(list(onchip.values()))
        lines.append(("On-chip efficiency", _percent(on.product, "on-chip")))
        if eta_cf is not None:
            lines.append((EXPECTED_RATE_LINE, expected_detector_rate(on, eta_cf, off, rep_rate)))

    deviations = {}
    for name, target in (reference or {}).items():
        actual = None
        for key, m in lines:
            if key == name:
                actual = m.value
        if actual is None:
            raise BudgetError(f"reference value given for unknown line '{name}'")
        if abs(actual - target) > rel_tolerance * abs(target):
            deviations[name] = (actual, float(target))
            message = f"{name}: computed {actual:.4g}, reference {target:.4g}"
            logger.warning(message)
            warnings.warn(message, ExpectationDeviationWarning)
    return BudgetReport(lines, deviations)
