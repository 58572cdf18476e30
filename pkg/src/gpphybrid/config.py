"""Run configuration shared by the CLI subcommands.

A config file is a JSON object. Recognised keys::

    in, out, model_dir, drivers_dir, out_dir, grid_a, grid_b, pred,
    bias_spec                      paths
    impute                         "reject" | "site-median"
    k, seed                        fold count and fold seed
    days                           days per aggregation period
    sites                          synthetic corpus: number of sites
    fapar_scale, fapar_offset      NIRv -> fAPAR calibration
    pmodel                         object of PModelParams overrides
    gbt                            object of GBTConfig overrides

Command-line flags override config values; anything unset falls back to the
built-in defaults below.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from gpphybrid.errors import InvalidInputError
from gpphybrid.learner import GBTConfig
from gpphybrid.pmodel import PModelParams

PATH_KEYS = ("in", "out", "model_dir", "drivers_dir", "out_dir", "grid_a", "grid_b", "pred", "bias_spec")
SCALAR_KEYS = ("impute", "k", "seed", "days", "sites", "fapar_scale", "fapar_offset")
IMPUTE_POLICIES = ("reject", "site-median")


@dataclass(frozen=True)
class RunConfig:
    paths: dict = field(default_factory=dict)
    pmodel: PModelParams = field(default_factory=PModelParams)
    gbt: GBTConfig = field(default_factory=GBTConfig)
    k: int = 5
    seed: int = 42
    impute: str = "reject"
    fapar_scale: float = 1.0
    fapar_offset: float = 0.0
    days: float = 365.0
    sites: int = 20

    def __post_init__(self):
        if self.impute not in IMPUTE_POLICIES:
            raise InvalidInputError(f"impute must be one of {IMPUTE_POLICIES}, got {self.impute!r}")
        if int(self.k) != self.k or self.k < 2:
            raise InvalidInputError("k must be an integer >= 2")
        if not self.fapar_scale > 0:
            raise InvalidInputError("fapar_scale must be > 0")
        if not self.days > 0:
            raise InvalidInputError("days must be > 0")
        if int(self.sites) != self.sites or self.sites < 1:
            raise InvalidInputError("sites must be an integer >= 1")

    def path(self, key: str) -> Optional[Path]:
        value = self.paths.get(key)
        return None if value is None else Path(value)

    def require_inputs(self, *keys: str) -> None:
        """Fail unless every named input path is set and exists."""
        for key in keys:
            p = self.path(key)
            if p is None:
                raise InvalidInputError(f"--{key.replace('_', '-')} is required")
            if not p.exists():
                raise InvalidInputError(f"input path does not exist: {p}")


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"config {path} must be a JSON object")
    unknown = set(data) - set(PATH_KEYS) - set(SCALAR_KEYS) - {"pmodel", "gbt"}
    if unknown:
        raise InvalidInputError(f"config {path}: unknown keys {sorted(unknown)}")
    return data


def build_config(file_values: dict = None, overrides: dict = None) -> RunConfig:
    """Merge config-file values with flag overrides (``None`` means "not given")."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("pmodel", "gbt"):
        if not isinstance(merged.get(key, {}), dict):
            raise InvalidInputError(f"config key {key!r} must be an object")
    kwargs = {k: merged[k] for k in SCALAR_KEYS if k in merged}
    try:
        for key in ("k", "seed", "sites"):
            if key in kwargs:
                kwargs[key] = int(kwargs[key])
        for key in ("fapar_scale", "fapar_offset", "days"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad config value: {exc}") from exc
    return RunConfig(
        paths={k: str(merged[k]) for k in PATH_KEYS if merged.get(k) is not None},
        pmodel=PModelParams.from_dict(merged.get("pmodel", {})),
        gbt=GBTConfig.from_dict(merged.get("gbt", {})),
        **kwargs,
    )
