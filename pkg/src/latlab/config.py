"""Experiment configuration: a flat JSON document, validated on load."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

from .domains import PREDICATES, make_domain
from .exceptions import ConfigError
from .lattice import DomainSpec
from .maps import FAMILIES, MapSpec, builtin_map

MODES = ("robustness-single", "measure-sweep", "q-grid-scan", "bounds-report")
FORMATS = ("json", "csv")


@dataclass
class ExperimentConfig:
    family: str
    params: list[float]
    lower: list[float]
    upper: list[float]
    h: float
    mode: str
    predicate: Optional[str] = None
    q: Optional[list[float]] = None
    n_samples: int = 100_000
    seed: int = 0
    resolution: int = 100
    h_values: Optional[list[float]] = None
    out_dir: str = "out"
    format: str = "json"
    name: str = "report"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown map family {self.family!r}; known: {', '.join(FAMILIES)}")
        if self.predicate is not None and self.predicate not in PREDICATES:
            raise ConfigError(f"unknown domain predicate {self.predicate!r}; known: {sorted(PREDICATES)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; known: {', '.join(MODES)}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; known: {', '.join(FORMATS)}")
        for name in ("params", "lower", "upper"):
            _check_numbers(name, getattr(self, name))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ConfigError("lower and upper must be non-empty and of equal length")
        _check_positive("h", self.h)
        if self.h_values is not None:
            _check_numbers("h_values", self.h_values)
            for h in self.h_values:
                _check_positive("h_values entry", h)
        if self.mode == "robustness-single":
            if self.q is None:
                raise ConfigError("mode robustness-single needs an offset q")
            _check_numbers("q", self.q)
            if len(self.q) != len(self.lower):
                raise ConfigError(f"q has {len(self.q)} components, domain has {len(self.lower)}")
        for name in ("n_samples", "seed", "resolution"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
        if self.mode in ("measure-sweep", "bounds-report") and self.n_samples < 100:
            raise ConfigError(f"n_samples must be at least 100, got {self.n_samples}")
        if self.mode == "q-grid-scan":
            if self.resolution < 2:
                raise ConfigError(f"resolution must be at least 2, got {self.resolution}")
            if len(self.lower) > 2:
                raise ConfigError("q-grid-scan is limited to d <= 2")
        if not self.name or "/" in self.name:
            raise ConfigError(f"invalid output name {self.name!r}")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        missing = [k for k in ("family", "params", "lower", "upper", "h", "mode") if k not in raw]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        return cls(**raw)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def build_map(self) -> MapSpec:
        f = builtin_map(self.family, self.params, dimension=len(self.lower) if self.family != "affine" else None)
        if f.dimension != len(self.lower):
            raise ConfigError(f"map dimension {f.dimension} != domain dimension {len(self.lower)}")
        return f

    def build_domain(self) -> DomainSpec:
        return make_domain(self.lower, self.upper, self.predicate)


def _check_numbers(name, values):
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values
    ):
        raise ConfigError(f"{name} must be a list of finite numbers")


def _check_positive(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")
