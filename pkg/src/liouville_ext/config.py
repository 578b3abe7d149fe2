"""Experiment configuration: flat ``key = value`` text with typed keys.

Lists are comma separated.  Lines starting with ``#`` are comments.  Unknown
keys, repeated keys and values of the wrong type are rejected.

Example::

    genus = 2
    h = 0.1
    flow_times = 100, 200, 400
    seeds = 0, 1, 2
    curves = a1, a1 b1
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    genus: int = 2
    h: float = 0.1
    mesh_seed: int = 0
    flow_times: tuple[float, ...] = (100.0, 200.0, 400.0)
    seeds: tuple[int, ...] = tuple(range(10))
    n_densities: int = 5
    n_bumps: int = 3
    bump_radius: float = 0.8
    density_seed: int = 100
    tolerance: float = 0.05          # the headline tolerance of the experiment
    mesh_factor: float = 5.0         # inequalities allow a factor 1 + mesh_factor * h
    band_radius: float = 0.4         # cover radius for the long approximants
    curves: tuple[str, ...] = ("a1",)
    n_regions: int = 50
    region_seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if self.genus < 2:
            raise ConfigError("genus must be at least 2")
        if not 0.01 <= self.h <= 1.0:
            raise ConfigError("h must lie in [0.01, 1]")
        if not self.flow_times or any(t <= 0 for t in self.flow_times):
            raise ConfigError("flow_times must be positive")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.tolerance <= 0 or self.mesh_factor < 0 or self.band_radius <= 0:
            raise ConfigError("tolerances and radii must be positive")
        if self.n_densities < 0 or self.n_regions < 0 or self.n_bumps < 1:
            raise ConfigError("counts must be nonnegative")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def as_dict(self, with_out: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not with_out:
            d.pop("out")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @property
    def config_hash(self) -> str:
        """Hash of every field except the output directory."""
        text = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = []
        for k, v in self.as_dict(with_out=True).items():
            lines.append(f"{k} = {', '.join(map(str, v)) if isinstance(v, list) else v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        items = [r.strip() for r in raw.split(",") if r.strip()]
        if kind == "tuple[float, ...]":
            return tuple(float(r) for r in items)
        if kind == "tuple[int, ...]":
            return tuple(int(r) for r in items)
        if kind == "tuple[str, ...]":
            return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    raise ConfigError(f"no converter for {name}")


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {n}: repeated key {key!r}")
        values[key] = _convert(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
