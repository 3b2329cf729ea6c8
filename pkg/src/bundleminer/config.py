"""Run configuration: flat key = value files, overridable by CLI flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields

from .errors import UsageError

ENV_CONFIG = "BUNDLE_MINER_CONFIG"

# Default fraction of patients used for min_support when not configured.
DEFAULT_SUPPORT_FRACTION = 0.02


@dataclass
class RunConfig:
    events: str | None = None
    diagnoses: str | None = None
    codemap: str | None = None
    out_dir: str = "out"
    min_support: int | None = None  # None -> 2% of patients, at least 1
    max_len: int = 4
    collapse_repeats: bool = False
    k_min: int = 15
    k_max: int = 35
    q_min: int = 15
    q_max: int = 35
    alpha: float | None = None  # None -> 50/k
    beta: float = 0.01
    iterations: int = 500
    weight_threshold: float = 0.0
    topics_seed: int = 2016
    louvain_seed: int = 2016
    unmapped_policy: str = "passthrough"

    def validate(self) -> None:
        if self.k_min > self.k_max or self.q_min > self.q_max:
            raise UsageError("topic count ranges must be non-empty")
        if self.max_len < 1:
            raise UsageError("max_len must be >= 1")
        if self.min_support is not None and self.min_support < 1:
            raise UsageError("min_support must be >= 1")
        if self.iterations < 1:
            raise UsageError("iterations must be >= 1")
        if self.weight_threshold < 0:
            raise UsageError("weight_threshold must be >= 0")
        if self.unmapped_policy not in ("passthrough", "drop"):
            raise UsageError("unmapped_policy must be passthrough or drop")

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

_BOOL_KEYS = {"collapse_repeats"}
_INT_KEYS = {
    "min_support",
    "max_len",
    "k_min",
    "k_max",
    "q_min",
    "q_max",
    "iterations",
    "topics_seed",
    "louvain_seed",
}
_FLOAT_KEYS = {"alpha", "beta", "weight_threshold"}


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"config key {key}: expected boolean, got {value!r}")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise UsageError(f"config key {key}: bad value {value!r}") from None
    return value


def parse_config_file(path) -> dict:
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_num, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {line_num}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _FIELD_TYPES:
                raise UsageError(f"{path}: line {line_num}: unknown key {key!r}")
            values[key] = _coerce(key, value)
    return values


def load_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Layered config: file (explicit path or $BUNDLE_MINER_CONFIG), then flags."""
    values: dict = {}
    path = config_path or os.environ.get(ENV_CONFIG)
    if path:
        values.update(parse_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    config = RunConfig(**values)
    config.validate()
    return config
