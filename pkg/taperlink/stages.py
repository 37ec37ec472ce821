"""
Concrete pipeline stages

Each stage reads its parameters from the RunConfig it was built with and
exchanges plain Python objects with its neighbours:

    dispersion -> taper -> transfer
    g2 -> budget
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

from config.settings import RunConfig
from taperlink.base_stage import BaseStage
from taperlink.budget import (
    EXPECTED_RATE_LINE,
    Measured,
    beta_factor,
    budget_report,
    correct_fiber_loss,
    one_way_fiber,
    pure_single_photon_rate,
)
from taperlink.eme import propagate_eme
from taperlink.errors import BudgetError
from taperlink.fitting import fit_g2
from taperlink.geometry import GuideSelector
from taperlink.modesolver import anticrossings, solve_widths, track_branches
from taperlink.taper import adiabaticity_margin, alpha_for_length, design_taper, dispersion_table

logger = logging.getLogger(__name__)


def sweep_grid(config: RunConfig) -> np.ndarray:
    """Widths of the configured dispersion sweep, nm"""
    s = config.solver
    return np.linspace(s.sweep_w_min_nm, s.sweep_w_max_nm, s.sweep_points)


class DispersionStage(BaseStage):
    """
    Width sweep of the bare waveguide, the bare fiber and the coupled system.

    Outputs the per-width mode lists (consumed by the taper stage), the
    tracked branches of all three systems and the anticrossing widths of the
    two highest TE-like supermodes.
    """

    def __init__(self, config: Optional[RunConfig] = None, n_jobs: int = 1, include_fiber: bool = True):
        super().__init__(
            stage_id="dispersion",
            name="Dispersion Sweep",
            description="Effective indices versus waveguide width",
            config=config,
        )
        self.n_jobs = n_jobs
        self.include_fiber = include_fiber

    def get_required_inputs(self) -> list[str]:
        return []

    def _solve(self, widths, which):
        c = self.config
        return solve_widths(
            widths, c.geometry, c.materials, which,
            n_modes=c.solver.n_modes,
            resolution=c.solver.resolution_nm,
            n_eff_guess=c.solver.n_eff_guess,
            padding=c.padding_nm,
            min_feature_cells=c.solver.min_feature_cells,
            n_jobs=self.n_jobs,
        )

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        widths = sweep_grid(self.config)
        wg_modes = self._solve(widths, GuideSelector.WAVEGUIDE)
        coupled_modes = self._solve(widths, GuideSelector.COUPLED)

        branches = {
            "waveguide": track_branches(wg_modes, widths),
            "coupled": track_branches(coupled_modes, widths),
        }
        if self.include_fiber:
            branches["fiber"] = track_branches(self._solve(widths, GuideSelector.FIBER), widths)

        # the two highest TE-like supermodes at each width
        upper, lower = [], []
        for modes in coupled_modes:
            te = sorted((m.n_eff for m in modes if m.te_fraction > 0.5), reverse=True)
            upper.append(te[0] if te else np.nan)
            lower.append(te[1] if len(te) > 1 else np.nan)
        crossings = anticrossings(widths, upper, lower)
        logger.info("dispersion sweep over %d widths: anticrossings at %s nm", len(widths),
                    ", ".join(f"{w:g}" for w in crossings) or "none")
        return {
            "widths": widths,
            "wg_modes": wg_modes,
            "coupled_modes": coupled_modes,
            "branches": branches,
            "anticrossings": crossings,
        }


class TaperDesignStage(BaseStage):
    """Synthesize the adiabatic profile and certify it against its own table"""

    def __init__(self, config: Optional[RunConfig] = None):
        super().__init__(
            stage_id="taper",
            name="Taper Design",
            description="Adiabatic width profile from the dispersion table",
            config=config,
        )

    def get_required_inputs(self) -> list[str]:
        return ["widths", "wg_modes", "coupled_modes"]

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        t = self.config.taper
        dispersion = dispersion_table(input_data["widths"], input_data["wg_modes"], input_data["coupled_modes"])
        profile = design_taper(dispersion, t.w_start_nm, t.w_tip_nm, alpha=t.alpha, n_samples=t.n_samples)
        report = adiabaticity_margin(profile, dispersion)
        data = {
            "dispersion": dispersion,
            "profile": profile,
            "adiabaticity": report,
            "alpha_for_length": None,
        }
        if t.length_um is not None:
            data["alpha_for_length"] = alpha_for_length(dispersion, t.w_start_nm, t.w_tip_nm, t.length_um,
                                                        n_samples=t.n_samples)
        return data


class TransferStage(BaseStage):
    """EME transmission of a profile at the configured wavelength"""

    def __init__(self, config: Optional[RunConfig] = None, n_jobs: int = 1, reverse: bool = False):
        super().__init__(
            stage_id="transfer",
            name="Chip-to-Fiber Transfer",
            description="Eigenmode-expansion propagation along the taper",
            config=config,
        )
        self.n_jobs = n_jobs
        self.reverse = reverse

    def get_required_inputs(self) -> list[str]:
        return ["profile"]

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        c = self.config
        record = propagate_eme(
            input_data["profile"], c.geometry, c.materials, c.geometry.wavelength,
            n_sections=c.taper.n_sections,
            n_modes=c.solver.n_modes,
            resolution=c.solver.resolution_nm,
            padding=c.padding_nm,
            min_feature_cells=c.solver.min_feature_cells,
            contact_window=c.taper.contact_window_um,
            reverse=self.reverse,
            n_jobs=self.n_jobs,
        )
        return {"transfer": record, "t_fiber": record.t_fiber}


class G2FitStage(BaseStage):
    """Parametric and area-method g2(0) of a coincidence histogram"""

    def __init__(self, config: Optional[RunConfig] = None):
        super().__init__(
            stage_id="g2",
            name="g2 Fit",
            description="Pulsed second-order correlation fit",
            config=config,
        )

    def get_required_inputs(self) -> list[str]:
        return ["histogram"]

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        f = self.config.fit
        fit = fit_g2(input_data["histogram"], half_window=f.half_window_ns, k_min=f.k_min,
                     envelope_threshold=f.envelope_threshold)
        return {
            "g2_fit": fit,
            "g2_zero": Measured(fit.g2_zero, float(fit.result.stderr[4]), "g2(0)"),
            "preparation_efficiency": fit.preparation_efficiency,
        }


class BudgetStage(BaseStage):
    """
    Efficiency budget from the configured stages.

    The detected single-photon rate is taken from `budget.rate_sp_mhz` when
    given; otherwise it is derived from the detector rate and g2(0), where a
    g2(0) produced by an upstream fit stage takes the place of the configured
    value.
    """

    def __init__(self, config: Optional[RunConfig] = None, with_expected: bool = True):
        super().__init__(
            stage_id="budget",
            name="Efficiency Budget",
            description="Table-style source efficiency budget",
            config=config,
        )
        self.with_expected = with_expected

    def get_required_inputs(self) -> list[str]:
        return []

    def _rate_sp(self, input_data: Dict[str, Any]) -> Measured:
        b = self.config.budget
        if b.rate_sp_mhz is not None:
            return Measured(b.rate_sp_mhz.value, b.rate_sp_mhz.sigma, "rate_sp", "MHz")
        g2_zero = input_data.get("g2_zero", b.g2_zero)
        if b.rate_snspd_mhz is None or g2_zero is None:
            raise BudgetError("budget needs rate_sp_mhz, or rate_snspd_mhz together with g2_zero")
        rate = Measured(b.rate_snspd_mhz.value, b.rate_snspd_mhz.sigma, "rate_snspd", "MHz")
        return pure_single_photon_rate(rate, g2_zero)

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        b = self.config.budget
        if not b.offchip:
            raise BudgetError("budget.offchip lists no stages")
        rate_sp = self._rate_sp(input_data)
        eta_cf = b.eta_cf if self.with_expected else None
        reference = dict(b.reference)
        if eta_cf is None or not b.onchip:
            reference.pop(EXPECTED_RATE_LINE, None)
        if not b.onchip:
            reference.pop("On-chip efficiency", None)
        report = budget_report(rate_sp, b.offchip, b.onchip or None, eta_cf=eta_cf,
                               rep_rate=b.rep_rate_mhz, reference=reference)

        data: Dict[str, Any] = {"report": report, "rate_sp": rate_sp, "beta": None,
                                "one_way_fiber": None, "eta_cf_corrected": None}
        if b.gamma_total_per_ns is not None and b.gamma_ref_per_ns is not None:
            data["beta"] = beta_factor(b.gamma_total_per_ns, b.gamma_ref_per_ns)
        if b.fiber_transmission is not None:
            data["one_way_fiber"] = one_way_fiber(b.fiber_transmission)
            if b.eta_cf is not None:
                data["eta_cf_corrected"] = correct_fiber_loss(b.eta_cf, data["one_way_fiber"])
        return data
