"""
Command-line entry point

    taperlink [--config FILE] [--out DIR] [--threads N] [-v] <command> ...

Commands: modes, sweep, taper {design,check,propagate,sweep-lambda},
fit {g2,saturation,decay,synth-g2}, budget, eta-cf, reproduce
{dispersion,taper,pcwg_budget}. Tables go to stdout, files to --out; every failure
is reported as one `error: ...` line on stderr with exit code 2.
"""

import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from config.settings import RunConfig, bundled, load_config
from orchestrator import Orchestrator
from taperlink.budget import extract_eta_cf_spectrum
from taperlink.eme import propagate_eme, sweep_wavelength, write_spectrum_csv, write_transfer_csv
from taperlink.errors import ConfigError, TaperlinkError
from taperlink.fitting import (
    G2_PARAMS,
    SYNTHETIC_G2,
    G2Histogram,
    fit_decay,
    fit_g2,
    fit_saturation,
    poisson_weights,
    synthesize_g2,
)
from taperlink.geometry import GuideSelector, build_cross_section
from taperlink.io_utils import atomic_write_text, csv_text, read_columns, resolve_output, write_csv
from taperlink.modesolver import solve_modes, sweep_width, write_field_csv, write_sweep_csv
from taperlink.plotting import save_line_plot
from taperlink.stages import BudgetStage, DispersionStage, TaperDesignStage, TransferStage, sweep_grid
from taperlink.taper import (
    adiabaticity_margin,
    alpha_for_length,
    design_taper,
    dispersion_table,
    read_dispersion_csv,
    read_profile_csv,
    write_dispersion_csv,
    write_profile_csv,
)

logger = logging.getLogger("taperlink")

EXIT_ERROR = 2


class CliError(TaperlinkError):
    """Bad command-line usage detected after parsing"""


# ---------------------------------------------------------------------------
# Helpers

def _config_path(value: Optional[str]) -> Optional[str]:
    """A file path, or the name of a bundled configuration ('pcwg_budget')"""
    if value is None or os.path.exists(value) or os.sep in value:
        return value
    try:
        return bundled(value)
    except ConfigError:
        return value


def _load(args, overrides: Optional[Dict[str, Any]] = None, default: Optional[str] = None) -> RunConfig:
    path = _config_path(args.config if args.config is not None else default)
    logger.info("configuration: %s", path or "built-in defaults")
    return load_config(path, overrides)


def _out(args, name: str) -> Path:
    return resolve_output(args.out, name)


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _parse_range(text: str) -> np.ndarray:
    """'start:stop:step' (inclusive) or a comma-separated list"""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"range must be start:stop:step, got '{text}'")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise CliError(f"range must be numeric, got '{text}'") from None
        if step == 0 or (stop - start) / step < 0:
            raise CliError(f"step {step:g} does not lead from {start:g} to {stop:g}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    try:
        return np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise CliError(f"wavelength list must be numeric, got '{text}'") from None


def _geometry_overrides(args) -> Dict[str, Any]:
    return {
        "geometry.wg_width_nm": getattr(args, "width", None),
        "geometry.wavelength_nm": getattr(args, "wavelength", None),
        "geometry.fiber_diameter_nm": getattr(args, "fiber_diameter", None),
        "geometry.gap_nm": getattr(args, "gap", None),
        "solver.resolution_nm": getattr(args, "resolution", None),
        "solver.n_modes": getattr(args, "n_modes", None),
    }


def _dispersion_for(config: RunConfig, args):
    """Dispersion table from --dispersion, or solved over the configured sweep"""
    if getattr(args, "dispersion", None):
        return read_dispersion_csv(args.dispersion, config.geometry.wavelength)
    stage = DispersionStage(config, n_jobs=args.threads, include_fiber=False)
    data = stage.run({})
    return dispersion_table(data["widths"], data["wg_modes"], data["coupled_modes"])


# ---------------------------------------------------------------------------
# modes / sweep

def cmd_modes(args) -> int:
    config = _load(args, _geometry_overrides(args))
    which = GuideSelector.parse(args.which)
    cs = build_cross_section(config.geometry, config.materials, config.solver.resolution_nm, which,
                             padding=config.padding_nm, min_feature_cells=config.solver.min_feature_cells)
    modes = solve_modes(cs, n_modes=config.solver.n_modes, n_eff_guess=config.solver.n_eff_guess)
    _emit(csv_text(("mode", "n_eff", "te_fraction"),
                   [(i, m.n_eff, m.te_fraction) for i, m in enumerate(modes)]))
    if args.fields:
        for i, mode in enumerate(modes):
            write_field_csv(args.out or ".", mode, prefix=f"{which.value}_mode{i}")
    return 0


def cmd_sweep(args) -> int:
    overrides = _geometry_overrides(args)
    overrides.update({
        "solver.sweep_w_min_nm": args.w_min,
        "solver.sweep_w_max_nm": args.w_max,
        "solver.sweep_points": args.points,
    })
    config = _load(args, overrides)
    widths = sweep_grid(config)
    selectors = list(GuideSelector) if args.all else [GuideSelector.parse(args.which)]

    series = {}
    for which in selectors:
        branches = sweep_width(
            widths, config.geometry, config.materials, which,
            n_modes=config.solver.n_modes,
            resolution=config.solver.resolution_nm,
            n_eff_guess=config.solver.n_eff_guess,
            padding=config.padding_nm,
            min_feature_cells=config.solver.min_feature_cells,
            n_jobs=args.threads,
        )
        path = write_sweep_csv(_out(args, f"sweep_{which.value}.csv"), branches)
        _emit(f"{path}\n")
        for b in branches:
            series[f"{which.value} {b.branch_id}"] = (b.parameter, b.n_eff)
    if args.svg:
        path = save_line_plot(_out(args, "sweep.svg"), series, x_label="waveguide width (nm)", y_label="effective index")
        _emit(f"{path}\n")
    return 0


# ---------------------------------------------------------------------------
# taper

def _taper_overrides(args) -> Dict[str, Any]:
    overrides = _geometry_overrides(args)
    overrides.update({
        "taper.w_start_nm": getattr(args, "w_start", None),
        "taper.w_tip_nm": getattr(args, "w_tip", None),
        "taper.alpha": getattr(args, "alpha", None),
        "taper.length_um": getattr(args, "length", None),
        "taper.n_sections": getattr(args, "sections", None),
    })
    return overrides


def cmd_taper_design(args) -> int:
    config = _load(args, _taper_overrides(args))
    t = config.taper
    dispersion = _dispersion_for(config, args)
    alpha = t.alpha
    if args.length is not None:
        alpha = alpha_for_length(dispersion, t.w_start_nm, t.w_tip_nm, args.length, n_samples=t.n_samples)
    profile = design_taper(dispersion, t.w_start_nm, t.w_tip_nm, alpha=alpha, n_samples=t.n_samples)
    path = write_profile_csv(_out(args, args.profile), profile)
    if not getattr(args, "dispersion", None):
        write_dispersion_csv(_out(args, "dispersion.csv"), dispersion)
    _emit(f"alpha,{alpha:.6g}\nlength_um,{profile.length:.6g}\nprofile,{path}\n")
    return 0


def cmd_taper_check(args) -> int:
    config = _load(args, _taper_overrides(args))
    profile = read_profile_csv(args.profile)
    dispersion = _dispersion_for(config, args)
    report = adiabaticity_margin(profile, dispersion)
    alpha = config.taper.alpha
    _emit(
        f"max_ratio,{report.max_ratio:.6g}\n"
        f"y_at_max_um,{report.y_at_max:.6g}\n"
        f"w_at_max_nm,{report.w_at_max:.6g}\n"
        f"certified,{'yes' if report.certified(alpha) else 'no'}\n"
    )
    return 0


def _eme_options(config: RunConfig, args) -> Dict[str, Any]:
    return {
        "n_sections": config.taper.n_sections,
        "n_modes": config.solver.n_modes,
        "resolution": config.solver.resolution_nm,
        "padding": config.padding_nm,
        "min_feature_cells": config.solver.min_feature_cells,
        "contact_window": config.taper.contact_window_um,
        "reverse": args.reverse,
    }


def cmd_taper_propagate(args) -> int:
    config = _load(args, _taper_overrides(args))
    profile = read_profile_csv(args.profile)
    record = propagate_eme(profile, config.geometry, config.materials, config.geometry.wavelength,
                           n_jobs=args.threads, **_eme_options(config, args))
    path = write_transfer_csv(_out(args, "transfer.csv"), record)
    _emit(f"lambda_nm,{record.wavelength:.6g}\nT_fiber,{record.t_fiber:.6f}\ntransfer,{path}\n")
    return 0


def cmd_taper_sweep_lambda(args) -> int:
    config = _load(args, _taper_overrides(args))
    profile = read_profile_csv(args.profile)
    rows = sweep_wavelength(profile, config.geometry, config.materials, _parse_range(args.wavelengths),
                            n_jobs=args.threads, **_eme_options(config, args))
    path = write_spectrum_csv(_out(args, "transmission.csv"), rows)
    _emit(f"{path}\n")
    return 0


# ---------------------------------------------------------------------------
# fit

def _weights(args, counts):
    return poisson_weights(counts) if args.poisson else None


def cmd_fit_g2(args) -> int:
    config = _load(args, {"fit.rep_period_ns": args.rep_period})
    cols = read_columns(args.input, ("tau_ns", "counts"), min_rows=3)
    hist = G2Histogram(cols["tau_ns"], cols["counts"], config.fit.rep_period_ns)
    fit = fit_g2(hist, half_window=config.fit.half_window_ns, k_min=config.fit.k_min,
                 weights=_weights(args, hist.counts), envelope_threshold=config.fit.envelope_threshold)
    lo, hi = fit.g2_zero_ci
    rows = [(name, value) for name, value in fit.result.as_dict().items()]
    rows += [
        ("g2_zero_ci_low", lo),
        ("g2_zero_ci_high", hi),
        ("g2_zero_area", fit.g2_zero_area),
        ("blinking_amplitude", fit.blinking_amplitude),
        ("preparation_efficiency", fit.preparation_efficiency),
    ]
    _emit(csv_text(("quantity", "value"), rows))
    return 0


def cmd_fit_saturation(args) -> int:
    cols = read_columns(args.input, ("power", "counts"), min_rows=3)
    fit = fit_saturation(cols["power"], cols["counts"], weights=_weights(args, cols["counts"]))
    i_lo, i_hi = fit.result.confidence_interval(0)
    p_lo, p_hi = fit.result.confidence_interval(1)
    rows = [("i_max", fit.i_max), ("i_max_ci_low", i_lo), ("i_max_ci_high", i_hi),
            ("p_sat", fit.p_sat), ("p_sat_ci_low", p_lo), ("p_sat_ci_high", p_hi)]
    if args.power is not None:
        rows.append(("saturation_level", float(fit.saturation_level(args.power))))
    _emit(csv_text(("quantity", "value"), rows))
    return 0


def cmd_fit_decay(args) -> int:
    cols = read_columns(args.input, ("t_ns", "counts"), min_rows=10)
    fit = fit_decay(cols["t_ns"], cols["counts"], weights=_weights(args, cols["counts"]))
    lo, hi = fit.rate_ci
    rows = [("rate_per_ns", fit.rate), ("rate_ci_low", lo), ("rate_ci_high", hi),
            ("lifetime_ns", fit.lifetime), ("amplitude", fit.amplitude), ("background", fit.background)]
    _emit(csv_text(("quantity", "value"), rows))
    return 0


def cmd_fit_synth_g2(args) -> int:
    config = _load(args, {"fit.rep_period_ns": args.rep_period})
    T = config.fit.rep_period_ns
    params = dict(SYNTHETIC_G2)
    params["tau_blink"] = T
    for name in G2_PARAMS:
        value = getattr(args, name)
        if value is not None:
            params[name] = value
    hist = synthesize_g2([params[n] for n in G2_PARAMS], T, n_periods=args.periods,
                         noise=None if args.noise == "none" else args.noise,
                         rng=np.random.default_rng(args.seed))
    path = write_csv(_out(args, args.output), ("tau_ns", "counts"), zip(hist.tau, hist.counts))
    _emit(f"{path}\n")
    return 0


# ---------------------------------------------------------------------------
# budget / eta-cf

def cmd_budget(args) -> int:
    config = _load(args, {"budget.rep_rate_mhz": args.rep_rate})
    data = BudgetStage(config, with_expected=args.expected).run({})
    report = data["report"]
    text = report.to_text()
    if data["beta"] is not None:
        text += f"beta (from decay rates)  {data['beta'].value:.4f}\n"
    if data["one_way_fiber"] is not None:
        m = data["one_way_fiber"]
        text += f"One-way fiber transmission  {m.value:.4f} ± {m.sigma:.4f}\n"
    if data["eta_cf_corrected"] is not None:
        m = data["eta_cf_corrected"]
        text += f"eta_CF without fiber loss  {m.value:.4f} ± {m.sigma:.4f}\n"
    _emit(text)
    if args.out:
        write_csv(_out(args, "budget.csv"), ("line", "value", "sigma", "unit"), report.to_rows())
    return 0


def cmd_eta_cf(args) -> int:
    cols = read_columns(args.input, ("lambda_nm", "P_R", "P_I", "eta_fbs"), min_rows=1)
    rows = extract_eta_cf_spectrum(cols["lambda_nm"], cols["P_R"], cols["P_I"], cols["eta_fbs"])
    text = csv_text(("lambda_nm", "eta_cf"), rows)
    if args.out:
        _emit(f"{atomic_write_text(_out(args, 'eta_cf.csv'), text)}\n")
    else:
        _emit(text)
    return 0


# ---------------------------------------------------------------------------
# reproduce

def _run_workflow(orch: Orchestrator, initial: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    outcome = asyncio.run(orch.execute(initial))
    if outcome["status"] != "completed":
        raise CliError(f"{outcome['failed_at']}: {outcome['error']}")
    return {sid: result.data for sid, result in outcome["results"].items()}


def cmd_reproduce(args) -> int:
    if args.target == "pcwg_budget":
        config = _load(args, default="pcwg_budget")
        orch = Orchestrator()
        orch.register_stage(BudgetStage(config))
        orch.add_task("budget")
        data = _run_workflow(orch)["budget"]
        _emit(data["report"].to_text())
        write_csv(_out(args, "pcwg_budget.csv"), ("line", "value", "sigma", "unit"), data["report"].to_rows())
        return 0

    config = _load(args, default="default")
    orch = Orchestrator()
    orch.register_stage(DispersionStage(config, n_jobs=args.threads, include_fiber=args.target == "dispersion"))
    orch.add_task("dispersion")
    if args.target == "taper":
        orch.register_stage(TaperDesignStage(config))
        orch.register_stage(TransferStage(config, n_jobs=args.threads))
        orch.add_task("taper", dependencies=["dispersion"])
        orch.add_task("transfer", dependencies=["taper"], input_mapping={"profile": "profile"})
    data = _run_workflow(orch)

    if args.target == "dispersion":
        for name, branches in data["dispersion"]["branches"].items():
            _emit(f"{write_sweep_csv(_out(args, f'sweep_{name}.csv'), branches)}\n")
        crossings = data["dispersion"]["anticrossings"]
        _emit("anticrossings_nm," + ";".join(f"{w:g}" for w in crossings) + "\n")
        return 0

    taper, transfer = data["taper"], data["transfer"]
    write_profile_csv(_out(args, "profile.csv"), taper["profile"])
    write_dispersion_csv(_out(args, "dispersion.csv"), taper["dispersion"])
    write_transfer_csv(_out(args, "transfer.csv"), transfer["transfer"])
    rows = [("length_um", taper["profile"].length), ("max_ratio", taper["adiabaticity"].max_ratio),
            ("T_fiber", transfer["t_fiber"])]
    if taper["alpha_for_length"] is not None:
        rows.append(("alpha_for_length", taper["alpha_for_length"]))
    _emit(csv_text(("quantity", "value"), rows))
    return 0


# ---------------------------------------------------------------------------
# Parser

def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=float, help="waveguide width, nm")
    p.add_argument("--wavelength", type=float, help="free-space wavelength, nm")
    p.add_argument("--fiber-diameter", type=float, help="fiber diameter, nm")
    p.add_argument("--gap", type=float, help="waveguide-fiber gap, nm")
    p.add_argument("--resolution", type=float, help="grid spacing, nm")
    p.add_argument("--n-modes", type=int, help="modes per solve")


def _add_taper_flags(p: argparse.ArgumentParser) -> None:
    _add_geometry_flags(p)
    p.add_argument("--w-start", type=float, help="start width, nm")
    p.add_argument("--w-tip", type=float, help="tip width, nm")
    p.add_argument("--alpha", type=float, help="adiabaticity safety factor")
    p.add_argument("--sections", type=int, help="EME sections")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taperlink",
                                     description="Fiber-coupled waveguide single-photon source toolkit")
    parser.add_argument("--config", help="YAML configuration file or bundled name (default, pcwg_budget, nwg_budget)")
    parser.add_argument("--out", help="output directory (default: working directory)")
    parser.add_argument("--threads", type=int, default=1, help="parallel solves")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="guided modes of one cross-section")
    _add_geometry_flags(p)
    p.add_argument("--which", default="coupled", choices=[s.value for s in GuideSelector])
    p.add_argument("--fields", action="store_true", help="write field CSVs")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sweep", help="effective index versus width")
    _add_geometry_flags(p)
    p.add_argument("--w-min", type=float)
    p.add_argument("--w-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--which", default="coupled", choices=[s.value for s in GuideSelector])
    p.add_argument("--all", action="store_true", help="bare waveguide, bare fiber and coupled")
    p.add_argument("--svg", action="store_true", help="also write sweep.svg")
    p.set_defaults(func=cmd_sweep)

    taper = sub.add_parser("taper", help="taper design and propagation").add_subparsers(dest="action", required=True)
    p = taper.add_parser("design")
    _add_taper_flags(p)
    p.add_argument("--length", type=float, help="target length, um (overrides --alpha)")
    p.add_argument("--dispersion", help="dispersion CSV width_nm,n_wg,n_eff1,n_eff2")
    p.add_argument("--profile", default="profile.csv", help="output file name")
    p.set_defaults(func=cmd_taper_design)

    p = taper.add_parser("check")
    _add_taper_flags(p)
    p.add_argument("profile")
    p.add_argument("--dispersion", help="dispersion CSV width_nm,n_wg,n_eff1,n_eff2")
    p.set_defaults(func=cmd_taper_check)

    for name, func in (("propagate", cmd_taper_propagate), ("sweep-lambda", cmd_taper_sweep_lambda)):
        p = taper.add_parser(name)
        _add_taper_flags(p)
        p.add_argument("profile")
        if name == "sweep-lambda":
            p.add_argument("wavelengths", help="start:stop:step in nm, or a comma-separated list")
        p.add_argument("--reverse", action="store_true", help="launch from the fiber end")
        p.set_defaults(func=func)

    fit = sub.add_parser("fit", help="measurement fits").add_subparsers(dest="action", required=True)
    p = fit.add_parser("g2")
    p.add_argument("input", help="CSV tau_ns,counts")
    p.add_argument("--rep-period", type=float, help="excitation period, ns")
    p.add_argument("--poisson", action="store_true", help="weight by 1/counts")
    p.set_defaults(func=cmd_fit_g2)

    p = fit.add_parser("saturation")
    p.add_argument("input", help="CSV power,counts")
    p.add_argument("--power", type=float, help="report the saturation level at this power")
    p.add_argument("--poisson", action="store_true")
    p.set_defaults(func=cmd_fit_saturation)

    p = fit.add_parser("decay")
    p.add_argument("input", help="CSV t_ns,counts")
    p.add_argument("--poisson", action="store_true")
    p.set_defaults(func=cmd_fit_decay)

    p = fit.add_parser("synth-g2", help="write a synthetic g2 histogram")
    for name in G2_PARAMS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--rep-period", type=float)
    p.add_argument("--periods", type=int, default=20)
    p.add_argument("--noise", default="none", choices=["none", "poisson", "gaussian"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="g2_synthetic.csv")
    p.set_defaults(func=cmd_fit_synth_g2)

    p = sub.add_parser("budget", help="efficiency budget from the configuration")
    p.add_argument("--rep-rate", type=float, help="repetition rate, MHz")
    p.add_argument("--expected", action="store_true", help="add the expected detector rate")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("eta-cf", help="chip-to-fiber efficiency from reflection spectra")
    p.add_argument("input", help="CSV lambda_nm,P_R,P_I,eta_fbs")
    p.set_defaults(func=cmd_eta_cf)

    p = sub.add_parser("reproduce", help="run a complete workflow")
    p.add_argument("target", choices=["dispersion", "taper", "pcwg_budget"])
    p.set_defaults(func=cmd_reproduce)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    if args.threads < 1:
        sys.stderr.write("error: --threads must be >= 1\n")
        return EXIT_ERROR
    try:
        return args.func(args)
    except (TaperlinkError, ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        sys.stderr.write(f"error: {message}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
