"""
Run configuration: YAML files layered over built-in defaults

Precedence is command-line flags > configuration file > defaults. Unknown
sections or keys are rejected with their line number in the file.
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from taperlink.budget import Measured
from taperlink.errors import BudgetError, ConfigError, GeometryError
from taperlink.geometry import CouplerGeometry, MaterialSet

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent

# section -> key -> (kind, default)
SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    "geometry": {
        "wg_width_nm": ("positive", 300.0),
        "wg_thickness_nm": ("positive", 160.0),
        "fiber_diameter_nm": ("positive", 1000.0),
        "gap_nm": ("non_negative", 0.0),
        "wavelength_nm": ("positive", 940.0),
        "fiber_offset_nm": ("float", 0.0),
        "padding_nm": ("positive", 1000.0),
    },
    "materials": {
        "n_wg": ("positive", 3.46),
        "n_fiber": ("positive", 1.45),
        "n_bg": ("positive", 1.0),
    },
    "solver": {
        "resolution_nm": ("positive", 10.0),
        "n_modes": ("count", 6),
        "n_eff_guess": ("optional_positive", None),
        "min_feature_cells": ("count", 8),
        "sweep_w_min_nm": ("positive", 50.0),
        "sweep_w_max_nm": ("positive", 350.0),
        "sweep_points": ("count", 15),
    },
    "taper": {
        "w_start_nm": ("positive", 300.0),
        "w_tip_nm": ("positive", 140.0),
        "alpha": ("positive", 0.1),
        "length_um": ("optional_positive", 30.0),
        "n_sections": ("count", 60),
        "n_samples": ("count", 401),
        "sweep_points": ("count", 9),
        "contact_window_um": ("window", None),
    },
    "fit": {
        "rep_period_ns": ("positive", 1e3 / 76.0),
        "half_window_ns": ("optional_positive", None),
        "k_min": ("optional_count", None),
        "envelope_threshold": ("positive", 0.05),
    },
    "budget": {
        "rep_rate_mhz": ("positive", 76.0),
        "rate_snspd_mhz": ("optional_measured", None),
        "g2_zero": ("optional_measured", None),
        "rate_sp_mhz": ("optional_measured", None),
        "offchip": ("stages", {}),
        "onchip": ("stages", {}),
        "eta_cf": ("optional_measured", None),
        "fiber_transmission": ("optional_measured", None),
        "interface_transmission": ("positive", 0.88),
        "gamma_total_per_ns": ("optional_positive", None),
        "gamma_ref_per_ns": ("optional_positive", None),
        "reference": ("mapping", {}),
    },
}


@dataclass
class SolverSettings:
    resolution_nm: float
    n_modes: int
    n_eff_guess: Optional[float]
    min_feature_cells: int
    sweep_w_min_nm: float
    sweep_w_max_nm: float
    sweep_points: int


@dataclass
class TaperSettings:
    w_start_nm: float
    w_tip_nm: float
    alpha: float
    length_um: Optional[float]
    n_sections: int
    n_samples: int
    sweep_points: int
    contact_window_um: Optional[Tuple[float, float]]


@dataclass
class FitSettings:
    rep_period_ns: float
    half_window_ns: Optional[float]
    k_min: Optional[int]
    envelope_threshold: float


@dataclass
class BudgetSettings:
    rep_rate_mhz: float
    rate_snspd_mhz: Optional[Measured]
    g2_zero: Optional[Measured]
    rate_sp_mhz: Optional[Measured]
    offchip: Dict[str, Measured]
    onchip: Dict[str, Measured]
    eta_cf: Optional[Measured]
    fiber_transmission: Optional[Measured]
    interface_transmission: float
    gamma_total_per_ns: Optional[float]
    gamma_ref_per_ns: Optional[float]
    reference: Dict[str, float]


@dataclass
class RunConfig:
    """Fully resolved parameters plus where they came from"""
    geometry: CouplerGeometry
    materials: MaterialSet
    padding_nm: float
    solver: SolverSettings
    taper: TaperSettings
    fit: FitSettings
    budget: BudgetSettings
    source: Optional[str] = None
    overridden: List[str] = field(default_factory=list)
    values: Dict[str, Dict[str, Any]] = field(default_factory=dict, repr=False)

    def get(self, dotted: str) -> Any:
        section, key = dotted.split(".", 1)
        return self.values[section][key]


def default_values() -> Dict[str, Dict[str, Any]]:
    """Nested dictionary of every default"""
    return {section: {key: copy.deepcopy(default) for key, (_, default) in keys.items()}
            for section, keys in SCHEMA.items()}


def _key_lines(text: str) -> Dict[str, int]:
    """1-based line of every 'section' and 'section.key' in a YAML document"""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    if root is None:
        return lines
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("configuration must be a mapping of sections", line=root.start_mark.line + 1)
    for key_node, value_node in root.value:
        section = key_node.value
        lines[section] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for sub_key, _ in value_node.value:
                lines[f"{section}.{sub_key.value}"] = sub_key.start_mark.line + 1
    return lines


def _number(value: Any, dotted: str, line: Optional[int]) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{dotted} must be a number, got {value!r}", key=dotted, line=line)
    return float(value)


def _coerce(kind: str, value: Any, dotted: str, line: Optional[int] = None) -> Any:
    """Validate and convert one value according to its schema kind"""
    if kind.startswith("optional_") and value is None:
        return None
    if kind == "window":
        if value is None:
            return None
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{dotted} must be [y_start_um, y_end_um]", key=dotted, line=line)
        y0, y1 = (_number(v, dotted, line) for v in value)
        if y0 < 0 or y1 <= y0:
            raise ConfigError(f"{dotted} must satisfy 0 <= y_start < y_end", key=dotted, line=line)
        return (y0, y1)
    if kind in ("optional_measured", "measured"):
        try:
            return Measured.parse(value, label=dotted.split(".")[-1])
        except BudgetError as exc:
            raise ConfigError(f"{dotted}: {exc}", key=dotted, line=line) from None
    if kind == "stages":
        if not isinstance(value, dict):
            raise ConfigError(f"{dotted} must map stage names to values", key=dotted, line=line)
        stages = {}
        for name, raw in value.items():
            try:
                stages[str(name)] = Measured.parse(raw, label=str(name))
            except BudgetError as exc:
                raise ConfigError(f"{dotted}.{name}: {exc}", key=f"{dotted}.{name}", line=line) from None
        return stages
    if kind == "mapping":
        if not isinstance(value, dict):
            raise ConfigError(f"{dotted} must be a mapping", key=dotted, line=line)
        return {str(k): _number(v, f"{dotted}.{k}", line) for k, v in value.items()}
    if kind in ("count", "optional_count"):
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"{dotted} must be a positive integer, got {value!r}", key=dotted, line=line)
        return value
    number = _number(value, dotted, line)
    if kind in ("positive", "optional_positive") and not number > 0:
        raise ConfigError(f"{dotted} must be positive, got {value!r}", key=dotted, line=line)
    if kind == "non_negative" and number < 0:
        raise ConfigError(f"{dotted} must be >= 0, got {value!r}", key=dotted, line=line)
    return number


def _merge(target: Dict[str, Dict[str, Any]], data: Dict[str, Any], lines: Dict[str, int],
           overridden: List[str]) -> None:
    for section, entries in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section '{section}'", key=section, line=lines.get(section))
        if entries is None:
            continue
        if not isinstance(entries, dict):
            raise ConfigError(f"section '{section}' must be a mapping", key=section, line=lines.get(section))
        for key, value in entries.items():
            dotted = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{dotted}'", key=dotted, line=lines.get(dotted))
            kind, _ = SCHEMA[section][key]
            target[section][key] = _coerce(kind, value, dotted, lines.get(dotted))
            overridden.append(dotted)


def _coerce_defaults(values: Dict[str, Dict[str, Any]]) -> None:
    for section, keys in SCHEMA.items():
        for key, (kind, _) in keys.items():
            raw = values[section][key]
            if kind in ("stages", "mapping") and isinstance(raw, dict) and all(
                    isinstance(v, (Measured, float)) for v in raw.values()):
                continue
            if kind in ("optional_measured", "measured") and isinstance(raw, Measured):
                continue
            values[section][key] = _coerce(kind, raw, f"{section}.{key}")


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a RunConfig.

    Args:
        path: Optional YAML file
        overrides: Flat mapping 'section.key' -> value from command-line flags

    Returns:
        RunConfig with provenance

    Raises:
        ConfigError: unreadable file, unknown key, or invalid value
    """
    values = default_values()
    _coerce_defaults(values)
    overridden: List[str] = []
    source = None

    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"configuration file not found: {path}")
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
        lines = _key_lines(text)
        data = yaml.safe_load(text) or {}
        _merge(values, data, lines, overridden)
        source = str(path)
        logger.info("loaded configuration %s (%d keys)", path, len(overridden))

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{dotted}'", key=dotted)
        values[section][key] = _coerce(SCHEMA[section][key][0], value, dotted)
        if dotted not in overridden:
            overridden.append(dotted)

    return _build(values, source, overridden)


def _build(values: Dict[str, Dict[str, Any]], source: Optional[str], overridden: List[str]) -> RunConfig:
    g, m = values["geometry"], values["materials"]
    try:
        geometry = CouplerGeometry(
            wg_width=g["wg_width_nm"],
            wg_thickness=g["wg_thickness_nm"],
            fiber_diameter=g["fiber_diameter_nm"],
            gap=g["gap_nm"],
            wavelength=g["wavelength_nm"],
            fiber_offset=g["fiber_offset_nm"],
        )
        materials = MaterialSet(n_core_wg=m["n_wg"], n_fiber=m["n_fiber"], n_background=m["n_bg"])
    except GeometryError as exc:
        raise ConfigError(str(exc)) from None

    t = values["taper"]
    if not t["w_tip_nm"] < t["w_start_nm"]:
        raise ConfigError("taper.w_tip_nm must be below taper.w_start_nm", key="taper.w_tip_nm")
    if not t["alpha"] < 1.0:
        raise ConfigError(f"taper.alpha must lie in (0, 1), got {t['alpha']}", key="taper.alpha")
    s = values["solver"]
    if not s["sweep_w_min_nm"] < s["sweep_w_max_nm"]:
        raise ConfigError("solver.sweep_w_min_nm must be below solver.sweep_w_max_nm", key="solver.sweep_w_min_nm")

    return RunConfig(
        geometry=geometry,
        materials=materials,
        padding_nm=g["padding_nm"],
        solver=SolverSettings(**values["solver"]),
        taper=TaperSettings(**values["taper"]),
        fit=FitSettings(**values["fit"]),
        budget=BudgetSettings(**values["budget"]),
        source=source,
        overridden=list(overridden),
        values=values,
    )


def bundled(name: str) -> str:
    """Path of a configuration shipped in this directory ('pcwg_budget' -> pcwg_budget.yaml)"""
    path = CONFIG_DIR / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not path.exists():
        raise ConfigError(f"no bundled configuration '{name}'")
    return str(path)
