"""Model files: the JSON schema, the base case and output-directory settings."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional

from packaging.specifiers import SpecifierSet
from packaging.version import InvalidVersion, Version

from .bioeconomics import default_grid
from .errors import ConfigError, FileSystemError, ParsingError
from .models import BioModel, EconModel, Grid, HarvestModel, Horizon

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
SUPPORTED_FORMATS = SpecifierSet("~=1.0")
OUTPUT_DIR_ENV = "HARVEST_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "out"

# base case of the Pacific halibut fishery, area 3A
TABLE1: Dict[str, Any] = {
    "format_version": FORMAT_VERSION,
    "bio": {
        "mortality": 0.15,
        "r0": 0.543365,
        "half_saturation": 196.3923,
        "shock_lo": 0.89,
        "shock_hi": 1.06,
    },
    "econ": {
        "price": 4.3e6,
        "fixed_cost": 5e6,
        "effort_cost": 2e5,
        "catchability": 9.07979e-7,
        "elasticity": 2.55465,
        "discount_rate": 0.05,
    },
    "grid": {"step": 0.25},
    "solver": {"shock_points": 5, "monotone_shortcut": True, "horizon": 33},
}

_BIO_KEYS = ("mortality", "r0", "half_saturation", "shock_lo", "shock_hi")
_ECON_KEYS = ("price", "fixed_cost", "effort_cost", "catchability", "elasticity", "discount_rate")


@dataclass(frozen=True)
class ModelConfig:
    model: HarvestModel
    step: float = 0.25
    x_max: Optional[float] = None
    x_ref: Optional[float] = None
    horizon: int = 33

    def grid(self) -> Grid:
        if self.x_max is None:
            return default_grid(self.model.bio, self.step, self.x_ref)
        return Grid(x_max=self.x_max, step=self.step, x_ref=self.x_ref)

    def periods(self) -> Horizon:
        return Horizon(self.horizon)

    def with_overrides(self, step: Optional[float] = None, x_max: Optional[float] = None,
                       horizon: Optional[int] = None) -> "ModelConfig":
        changes: Dict[str, Any] = {}
        if step is not None:
            changes["step"] = step
        if x_max is not None:
            changes["x_max"] = x_max
        if horizon is not None:
            changes["horizon"] = horizon
        out = replace(self, **changes)
        out.grid()
        out.periods()
        return out


def _section(data: Dict[str, Any], name: str, required: bool) -> Dict[str, Any]:
    value = data.get(name)
    if value is None:
        if required:
            raise ConfigError(name, "section is missing")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be an object")
    return value


def _number(section: Dict[str, Any], prefix: str, key: str, default: Any = None) -> Any:
    if key not in section:
        if default is None:
            raise ConfigError(f"{prefix}.{key}", "is required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{prefix}.{key}", f"must be a number, got {value!r}")
    return float(value)


def _check_format(data: Dict[str, Any]) -> None:
    raw = str(data.get("format_version", FORMAT_VERSION))
    try:
        version = Version(raw)
    except InvalidVersion as e:
        raise ConfigError("format_version", f"not a version: {raw!r}") from e
    if version not in SUPPORTED_FORMATS:
        raise ConfigError("format_version", f"{raw} is not supported (need {SUPPORTED_FORMATS})")


def config_from_dict(data: Dict[str, Any]) -> ModelConfig:
    if not isinstance(data, dict):
        raise ConfigError("model", "top level must be an object")
    _check_format(data)
    bio_raw = _section(data, "bio", required=True)
    econ_raw = _section(data, "econ", required=True)
    grid_raw = _section(data, "grid", required=False)
    solver_raw = _section(data, "solver", required=False)

    bio = BioModel(
        mortality=_number(bio_raw, "bio", "mortality"),
        r0=_number(bio_raw, "bio", "r0"),
        half_saturation=_number(bio_raw, "bio", "half_saturation"),
        shock_lo=_number(bio_raw, "bio", "shock_lo", 1.0),
        shock_hi=_number(bio_raw, "bio", "shock_hi", 1.0),
    )
    econ = EconModel(**{k: _number(econ_raw, "econ", k) for k in _ECON_KEYS})

    shock_points = solver_raw.get("shock_points", 5)
    horizon = solver_raw.get("horizon", 33)
    for key, value in (("shock_points", shock_points), ("horizon", horizon)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"solver.{key}", f"must be an integer, got {value!r}")
    shortcut = solver_raw.get("monotone_shortcut", True)
    if not isinstance(shortcut, bool):
        raise ConfigError("solver.monotone_shortcut", f"must be true or false, got {shortcut!r}")

    cfg = ModelConfig(
        model=HarvestModel(bio=bio, econ=econ, shock_points=shock_points, monotone_shortcut=shortcut),
        step=_number(grid_raw, "grid", "step", 0.25),
        x_max=_number(grid_raw, "grid", "x_max") if "x_max" in grid_raw else None,
        x_ref=_number(grid_raw, "grid", "x_ref") if "x_ref" in grid_raw else None,
        horizon=horizon,
    )
    cfg.grid()
    cfg.periods()
    return cfg


def config_to_dict(cfg: ModelConfig) -> Dict[str, Any]:
    bio, econ = cfg.model.bio, cfg.model.econ
    grid: Dict[str, Any] = {"step": cfg.step}
    if cfg.x_max is not None:
        grid["x_max"] = cfg.x_max
    if cfg.x_ref is not None:
        grid["x_ref"] = cfg.x_ref
    return {
        "format_version": FORMAT_VERSION,
        "bio": {k: getattr(bio, k) for k in _BIO_KEYS},
        "econ": {k: getattr(econ, k) for k in _ECON_KEYS},
        "grid": grid,
        "solver": {
            "shock_points": cfg.model.shock_points,
            "monotone_shortcut": cfg.model.monotone_shortcut,
            "horizon": cfg.horizon,
        },
    }


def load_model(source: str) -> ModelConfig:
    """Load a model JSON file, or the base case for the literal `table1`."""
    if source.lower() == "table1":
        return config_from_dict(TABLE1)
    path = Path(source)
    if not path.exists():
        raise FileSystemError(f"File not found: {source}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParsingError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    logger.debug("loaded model from %s", path)
    return config_from_dict(data)


def table1() -> ModelConfig:
    return config_from_dict(TABLE1)


def output_dir(explicit: Optional[str] = None) -> Path:
    """`--out` wins over HARVEST_OUTPUT_DIR, which wins over ./out."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
