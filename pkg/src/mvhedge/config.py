"""Run configuration: a JSON file plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .analytics import Strategy
from .distributions import (
    GaussianSpec,
    RealWorldMeasure,
    RiskNeutralMeasure,
    case_study_specs,
    load_measure,
)
from .errors import InvalidInputError

MODES = ("solve", "frontier", "quantiles", "rho-sweep", "sigma-sweep", "reproduce-paper")
DEFAULT_LEVELS = (0.01, 0.025, 0.05, 0.075, 0.10, 0.125, 0.15, 0.175, 0.20)
PRESETS = {"independence": 0.0, "general": 0.33}

Source = Union[GaussianSpec, RealWorldMeasure, RiskNeutralMeasure]


class ConfigError(InvalidInputError):
    pass


@dataclass
class RunConfig:
    mode: str
    psi: Optional[Source] = None
    phi: Optional[Source] = None
    retail_rate: float = 120.0
    risk_aversion: float = 1.0
    grid_points: Optional[int] = None
    strategies: list[str] = field(default_factory=list)
    output_dir: Path = Path("hedge_output")
    a_sweep: list[float] = field(default_factory=lambda: [0.2, 0.5, 1.0, 2.0, 5.0])
    rho_values: list[float] = field(default_factory=lambda: [0.0, 0.13, 0.33, 0.75])
    sigma_values: list[float] = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.72])
    sigma_axis: str = "price"
    sigma_rho: Optional[float] = 0.75
    levels: list[float] = field(default_factory=lambda: list(DEFAULT_LEVELS))
    dump_matrices: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.retail_rate > 0:
            raise ConfigError(f"retail_rate must be positive, got {self.retail_rate}")
        if not self.risk_aversion > 0:
            raise ConfigError(f"risk_aversion must be positive, got {self.risk_aversion}")
        if self.grid_points is not None and self.grid_points < 2:
            raise ConfigError("grid_points must be >= 2")
        for s in self.strategies:
            try:
                Strategy(s)
            except ValueError:
                raise ConfigError(
                    f"unknown strategy {s!r}; choose from {[x.value for x in Strategy]}"
                ) from None
        if self.mode != "reproduce-paper" and (self.psi is None or self.phi is None):
            raise ConfigError("config must define 'psi' and 'phi' (or a 'preset')")
        if self.mode in ("rho-sweep", "sigma-sweep") and not (
            isinstance(self.psi, GaussianSpec) and isinstance(self.phi, GaussianSpec)
        ):
            raise ConfigError(f"{self.mode} needs Gaussian specs for psi and phi, not measure files")
        if self.sigma_axis not in ("price", "weather"):
            raise ConfigError("sigma_axis must be 'price' or 'weather'")

    def specs_with_grid(self) -> tuple[Source, Source]:
        psi, phi = self.psi, self.phi
        if self.grid_points is not None:
            if isinstance(psi, GaussianSpec):
                psi = replace(psi, grid_points=self.grid_points)
            if isinstance(phi, GaussianSpec):
                phi = replace(phi, grid_points=self.grid_points)
        return psi, phi


def _load_json(path: Path):
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _source(entry, base: Path) -> Source:
    """A spec dict, ``{"measure": path}``, or a path to either kind of file."""
    if isinstance(entry, str):
        path = (base / entry).resolve()
        data = _load_json(path)
        if isinstance(data, dict) and "grid" in data:
            return load_measure(path)
        return GaussianSpec.from_dict(data)
    if isinstance(entry, dict) and set(entry) == {"measure"}:
        path = (base / entry["measure"]).resolve()
        if not path.exists():
            raise ConfigError(f"file not found: {path}")
        return load_measure(path)
    if isinstance(entry, dict):
        return GaussianSpec.from_dict(entry)
    raise ConfigError(f"cannot interpret measure source {entry!r}")


def load_config(path: Optional[Path], mode: str) -> RunConfig:
    cfg = RunConfig(mode=mode)
    if path is None:
        return cfg
    path = Path(path)
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.parent
    known = {
        "preset", "psi", "phi", "retail_rate", "risk_aversion", "grid_points", "strategies",
        "output_dir", "a_sweep", "rho_values", "sigma_values", "sigma_axis", "sigma_rho", "levels",
        "dump_matrices",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "preset" in data:
        if data["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {data['preset']!r}; choose from {sorted(PRESETS)}")
        cfg.psi, cfg.phi = case_study_specs(PRESETS[data["preset"]])
    if "psi" in data:
        cfg.psi = _source(data["psi"], base)
    if "phi" in data:
        cfg.phi = _source(data["phi"], base)
    for key in ("retail_rate", "risk_aversion", "sigma_rho"):
        if key in data:
            setattr(cfg, key, None if data[key] is None else float(data[key]))
    if "grid_points" in data:
        cfg.grid_points = int(data["grid_points"])
    for key in ("a_sweep", "rho_values", "sigma_values", "levels"):
        if key in data:
            setattr(cfg, key, [float(v) for v in data[key]])
    if "strategies" in data:
        cfg.strategies = list(data["strategies"])
    if "output_dir" in data:
        cfg.output_dir = (base / data["output_dir"]).resolve()
    if "sigma_axis" in data:
        cfg.sigma_axis = data["sigma_axis"]
    if "dump_matrices" in data:
        cfg.dump_matrices = bool(data["dump_matrices"])
    return cfg
