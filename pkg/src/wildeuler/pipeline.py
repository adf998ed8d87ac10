"""Config-driven construction of paths, frames and scheme runs."""

from __future__ import annotations

import numpy as np

from .calibration import CalibrationTable, load_table
from .config import PRESETS, RunConfig
from .convex_integration import SchemeResult, initial_subsolution, run_scheme, seeded_schedule
from .oscillatory import OscillationParams
from .stochastics import StoppedPath, sample_wiener, stop_path
from .torus import TorusGrid
from .transform import (AbstractEulerFrame, FrameConfig, InitialData, NoiseSpec, PressureLaw,
                        default_noise_field, smooth_initial_data, w1inf_norm, build_frame)
from .waves import CutoffSpec


def make_grid(cfg: RunConfig) -> TorusGrid:
    return TorusGrid(cfg.grid.N, cfg.grid.res)


def make_initial_data(cfg: RunConfig, grid: TorusGrid | None = None) -> InitialData:
    grid = grid or make_grid(cfg)
    if cfg.initial.file is not None:
        with np.load(cfg.initial.file) as z:
            rho0, mom0 = np.asarray(z["rho0"], float), np.asarray(z["mom0"], float)
        if rho0.shape != grid.shape or mom0.shape != (grid.dim,) + grid.shape:
            raise ValueError("initial-data file does not match the configured grid")
        return InitialData(grid, rho0, mom0, cfg.initial.D)
    kw = dict(PRESETS[cfg.initial.preset])
    if kw.get("mean") is not None:
        kw["mean"] = (list(kw["mean"]) + [0.0] * grid.dim)[: grid.dim]
    return smooth_initial_data(grid, D=cfg.initial.D, **kw)


def make_path(cfg: RunConfig, seed: int) -> StoppedPath:
    return stop_path(sample_wiener(seed, cfg.grid.T, cfg.grid.dt), cfg.noise.a, cfg.noise.M)


def make_noise(cfg: RunConfig, seed: int, grid: TorusGrid | None = None) -> NoiseSpec:
    path = make_path(cfg, seed)
    if cfg.noise.kind == "multiplicative":
        return NoiseSpec("multiplicative", path)
    grid = grid or make_grid(cfg)
    G = default_noise_field(grid, cfg.noise.G_amp)
    return NoiseSpec("additive", path, G, w1inf_norm(grid, G))


def pressure(cfg: RunConfig) -> PressureLaw:
    return PressureLaw(cfg.pressure.kappa, cfg.pressure.gamma)


def frame_config(cfg: RunConfig) -> FrameConfig:
    return FrameConfig(stride=cfg.grid.stride, rho_min=cfg.scheme.rho_min, method=cfg.scheme.method,
                       pressure=pressure(cfg))


def make_frame(cfg: RunConfig, seed: int) -> AbstractEulerFrame:
    grid = make_grid(cfg)
    return build_frame(make_initial_data(cfg, grid), make_noise(cfg, seed, grid), frame_config(cfg))


def table_for(cfg: RunConfig) -> CalibrationTable:
    return load_table(cfg.calibration)


def oscillation_params(cfg: RunConfig, table: CalibrationTable | None = None) -> OscillationParams:
    table = table or table_for(cfg)
    cut = CutoffSpec(plateau=cfg.scheme.plateau, order=cfg.scheme.cutoff_order)
    return OscillationParams(cutoff=cut, selection=table.selection_params(cfg.grid.N))


def run_one(cfg: RunConfig, frame: AbstractEulerFrame, scheme_seed: int,
            table: CalibrationTable | None = None) -> SchemeResult:
    sc = cfg.scheme
    state = initial_subsolution(frame, sc.delta0, sc.margin)
    return run_scheme(state, seeded_schedule(sc.ns, scheme_seed), cfg.tol.I, sc.gain_floor,
                      oscillation_params(cfg, table), cfg.tol.weak, min_points=sc.min_points)
