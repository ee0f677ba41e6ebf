"""
Run configuration.

A ``RunConfig`` names the models (or fusion categories) to build, the checks
or suites to run on them and the numeric knobs. It is read from JSON or YAML
and validated with pydantic; every validation failure surfaces as a
CONFIG_INVALID error carrying the dotted path of the offending field.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.core.lattice import Region
from app.core.models import build_model, LatticeModel
from app.core.operator_core import BUDGET_ENV, DEFAULT_DENSE_BUDGET, RANK_CUTOFF, TOL
from app.core.vn_toolkit import ANGLE_TOL
from app.errors import ConfigError

logger = logging.getLogger(__name__)

LATTICE_CHECKS = (
    "straddle_identities",
    "canonical_state",
    "lto1",
    "lto2",
    "lto3_lto4",
    "hd",
    "rp",
    "finite_haag",
    "product_state",
    "interaction_algebra",
    "os_map",
    "rp_hamiltonian",
)
SKEIN_CHECKS = ("skein_modular", "skein_cond_exp", "skein_duality")
TOOLKIT_CHECKS = ("toolkit_modular", "toolkit_support")
KNOWN_CHECKS = LATTICE_CHECKS + SKEIN_CHECKS + TOOLKIT_CHECKS

SUITES: Dict[str, tuple] = {
    "lto": ("canonical_state", "lto1", "lto2", "lto3_lto4"),
    "hd": ("straddle_identities", "hd", "finite_haag"),
    "rp": ("rp", "rp_hamiltonian"),
    "bridge": ("product_state", "interaction_algebra", "os_map"),
    "modular": ("skein_modular", "skein_cond_exp"),
    "duality": ("skein_duality",),
    "tomita": TOOLKIT_CHECKS,
}
SUITES["lattice"] = LATTICE_CHECKS
SUITES["skein"] = SKEIN_CHECKS
SUITES["all"] = KNOWN_CHECKS


def expand_checks(names: List[str]) -> List[str]:
    """Replace suite names by their checks, keeping first occurrences in order."""
    out: List[str] = []
    for name in names:
        for check in SUITES.get(name, (name,)):
            if check not in out:
                out.append(check)
    return out


class Tolerances(BaseModel):
    tol: float = Field(TOL, gt=0)
    rank_cutoff: float = Field(RANK_CUTOFF, gt=0)
    angle: float = Field(ANGLE_TOL, gt=0)


class ModelSpec(BaseModel):
    """The JSON model descriptor: ``{"kind": "toric", "patch": [4, 4], "cut": 1.5, ...}``."""

    kind: Literal["toric", "qd", "quantum_double"] = "toric"
    patch: List[int] = Field(default_factory=lambda: [4, 4])
    cut: Optional[float] = None
    layout: Literal["square", "rotated"] = "rotated"
    convention: Literal["z_star", "x_star"] = "z_star"
    group: Union[str, List[List[int]]] = "Z2"

    @field_validator("patch")
    @classmethod
    def _patch_shape(cls, v: List[int]) -> List[int]:
        if len(v) != 2 or min(v) < 2:
            raise ValueError("patch must be [width, height] with both at least 2")
        return v

    def build(self, budget: Optional[int] = None) -> LatticeModel:
        params: Dict[str, Any] = {"patch": self.patch, "cut": self.cut, "layout": self.layout}
        if self.kind == "toric":
            params["convention"] = self.convention
        else:
            params["group"] = self.group
        return build_model(self.kind, params, budget)


class RegionSpec(BaseModel):
    """
    Explicit regions for one check.

    Regions are ``{"sites": [[x, y], ...]}`` or ``{"rect": [x0, y0, w, h]}``.
    ``R2``/``S2`` are the second pair of LTO3/LTO4 and the second region of
    the product-state check.
    """

    check: str
    R: Dict[str, Any]
    S: Optional[Dict[str, Any]] = None
    R2: Optional[Dict[str, Any]] = None
    S2: Optional[Dict[str, Any]] = None
    enlargements: Optional[List[Dict[str, Any]]] = None

    @field_validator("check")
    @classmethod
    def _lattice_check(cls, v: str) -> str:
        if v not in LATTICE_CHECKS:
            raise ValueError(f"UNKNOWN_CHECK: {v!r} takes no regions")
        return v

    @field_validator("R", "S", "R2", "S2")
    @classmethod
    def _region_shape(cls, v):
        if v is not None:
            parse_region(v)
        return v

    def region(self, name: str) -> Optional[Region]:
        value = getattr(self, name)
        return None if value is None else parse_region(value)

    def enlargement_regions(self) -> Optional[List[Region]]:
        return None if self.enlargements is None else [parse_region(e) for e in self.enlargements]


class CategorySpec(BaseModel):
    cat: Union[str, Dict[str, Any]] = "fibonacci"
    n: int = Field(2, ge=0)


class RunConfig(BaseModel):
    models: List[ModelSpec] = Field(default_factory=list)
    categories: List[CategorySpec] = Field(default_factory=list)
    checks: List[str] = Field(default_factory=list)
    regions: List[RegionSpec] = Field(default_factory=list)
    ladder: List[int] = Field(default_factory=lambda: [1])
    tolerances: Tolerances = Field(default_factory=Tolerances)
    dense_budget: int = Field(DEFAULT_DENSE_BUDGET, gt=0)
    jobs: int = Field(1, gt=0)
    samples: int = Field(8, gt=0)
    seed: int = 0
    timing: bool = False
    out: Optional[str] = None

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, v: List[str]) -> List[str]:
        for name in v:
            if name not in KNOWN_CHECKS and name not in SUITES:
                raise ValueError(f"UNKNOWN_CHECK: {name!r}")
        return v

    @field_validator("ladder")
    @classmethod
    def _positive_sizes(cls, v: List[int]) -> List[int]:
        if any(k < 1 for k in v):
            raise ValueError("ladder sizes must be positive")
        return v

    def expanded_checks(self) -> List[str]:
        return expand_checks(self.checks)


def parse_region(data: Dict[str, Any]) -> Region:
    if "rect" in data:
        x0, y0, w, h = (int(t) for t in data["rect"])
        if w < 1 or h < 1:
            raise ValueError("rect needs positive width and height")
        return Region.rectangle(x0, y0, w, h)
    if "sites" in data:
        return Region.from_json(data)
    raise ValueError("region needs 'sites' or 'rect'")


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a raw mapping into a RunConfig.

    Raises:
        ConfigError: with ``field`` set to the dotted path of the first failure
    """
    try:
        config = RunConfig.model_validate(data or {})
    except ValidationError as err:
        first = err.errors()[0]
        field = _field_path(first)
        message = str(first.get("msg", "invalid configuration"))
        if field == "checks":
            names = (data or {}).get("checks", [])
            for i, name in enumerate(names):
                if name not in KNOWN_CHECKS and name not in SUITES:
                    field = f"checks.{i}"
                    break
        raise ConfigError(message, field, {"errors": [dict(loc=list(e["loc"]), msg=e["msg"]) for e in err.errors()]})
    return apply_environment(config)


def apply_environment(config: RunConfig) -> RunConfig:
    """Let LTO_VERIFY_BUDGET override the dense budget."""
    env = os.environ.get(BUDGET_ENV)
    if not env:
        return config
    try:
        budget = int(env)
    except ValueError:
        raise ConfigError(f"{BUDGET_ENV} must be an integer", "dense_budget", {"value": env})
    if budget <= 0:
        raise ConfigError(f"{BUDGET_ENV} must be positive", "dense_budget", {"value": env})
    logger.debug("Dense budget %d from %s", budget, BUDGET_ENV)
    return config.model_copy(update={"dense_budget": budget})


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read a JSON or YAML config file and apply flag overrides.

    Args:
        path: Config file (JSON is read as YAML)
        overrides: Values taken from command-line flags; None entries are ignored

    Returns:
        The validated configuration
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as err:
        raise ConfigError(f"Cannot read config file: {err}", "", {"path": str(path)})
    except yaml.YAMLError as err:
        raise ConfigError(f"Config file is not valid YAML/JSON: {err}", "", {"path": str(path)})
    if not isinstance(data, dict):
        raise ConfigError("Config file must hold a mapping", "", {"path": str(path)})
    return validate_config(merge_overrides(data, overrides))


def merge_overrides(data: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is None or value == [] or value == ():
            continue
        if key == "tolerances":
            merged["tolerances"] = {**merged.get("tolerances", {}), **value}
        else:
            merged[key] = value
    return merged
