"""Run configuration: nested dataclasses with JSON load/dump and validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

# Named initial-data presets; every key is a keyword of transform.smooth_initial_data.
PRESETS = {
    "small": {"rho_amp": 0.02, "sol_amp": 0.01, "grad_amp": 0.0005, "mean": [0.1, -0.05]},
    "moderate": {"rho_amp": 0.2, "sol_amp": 0.1, "grad_amp": 0.002, "mean": None},
}


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    N: int = 2
    res: int = 64
    T: float = 1.0
    dt: float = 2.0 ** -10
    stride: int = 16            # path steps per field time step


@dataclass
class NoiseConfig:
    kind: str = "additive"
    path_seeds: list = field(default_factory=lambda: list(range(8)))
    M: float = 1.0
    a: float = 0.25
    G_amp: float = 0.05


@dataclass
class InitialConfig:
    preset: str = "small"
    file: str | None = None     # .npz with rho0 (res^N) and mom0 (N, res^N); overrides preset
    D: float = 1000.0


@dataclass
class PressureConfig:
    kappa: float = 1.0
    gamma: float = 2.0


@dataclass
class SchemeConfig:
    ns: list = field(default_factory=lambda: [16, 24, 32, 48, 64, 96])
    seeds: list = field(default_factory=lambda: [1, 2])
    delta0: float = 0.4
    margin: float = 0.05
    gain_floor: float = 0.0
    min_points: int = 4
    cutoff_order: int = 4
    plateau: float = 0.5
    rho_min: float = 0.2
    method: str = "spectral"


@dataclass
class Tolerances:
    I: float = 1e-3
    weak: float = 1e-3
    elliptic: float = 1e-8
    projection: float = 1e-12
    mass: float = 1e-8
    test_count: int = 25


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    pressure: PressureConfig = field(default_factory=PressureConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    tol: Tolerances = field(default_factory=Tolerances)
    calibration: str | None = None   # path of a calibration table; None -> shipped table
    output: str = "out"

    def validate(self) -> "RunConfig":
        g = self.grid
        if g.N not in (2, 3):
            raise ConfigError("N must be 2 or 3")
        if g.res < 8 or g.res & (g.res - 1):
            raise ConfigError(f"res={g.res} is not a power of two")
        steps = g.T / g.dt
        if g.T <= 0 or g.dt <= 0 or abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError(f"dt={g.dt} does not divide T={g.T}")
        if g.stride < 1 or round(steps) % g.stride:
            raise ConfigError("stride must divide T/dt")
        if self.noise.kind not in ("additive", "multiplicative"):
            raise ConfigError(f"unknown noise kind {self.noise.kind!r}")
        if not 0 < self.noise.a < 0.5:
            raise ConfigError("Hölder exponent a must lie in (0, 1/2)")
        if not self.noise.M > 0:
            raise ConfigError("M must be positive")
        if self.initial.file is None and self.initial.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.initial.preset!r}; known: {sorted(PRESETS)}")
        if self.initial.file is not None and not Path(self.initial.file).exists():
            raise ConfigError(f"initial-data file {self.initial.file} not found")
        ns = self.scheme.ns
        if not ns or any(b < a for a, b in zip(ns, ns[1:])):
            raise ConfigError("schedule n list must be non-empty and non-decreasing")
        if len(set(self.scheme.seeds)) != len(self.scheme.seeds):
            raise ConfigError("scheme seeds must be distinct")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        parts = {}
        for f in dataclasses.fields(cls):
            if f.name not in d:
                continue
            sub = {"grid": GridConfig, "noise": NoiseConfig, "initial": InitialConfig,
                   "pressure": PressureConfig, "scheme": SchemeConfig, "tol": Tolerances}.get(f.name)
            if sub is None:
                parts[f.name] = d[f.name]
                continue
            known = {x.name for x in dataclasses.fields(sub)}
            extra = set(d[f.name]) - known
            if extra:
                raise ConfigError(f"unknown keys in {f.name}: {sorted(extra)}")
            parts[f.name] = sub(**d[f.name])
        extra = set(d) - {f.name for f in dataclasses.fields(cls)}
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        return cls(**parts).validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
