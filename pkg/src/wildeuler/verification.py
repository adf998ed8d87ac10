"""Invariant checks of every module, returned as uniform records for the verify command."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationTable
from .config import RunConfig
from .convex_integration import SchemeResult, functional_single, x0_checklist
from .geometry import sample_interior_points, select_segment, verify_segment
from .oscillatory import OscillationParams, increment_unit
from .stochastics import discrete_holder_norm, holder_process, sample_wiener, stop_path
from .torus import (TorusGrid, divergence, helmholtz_project, solve_elliptic_m, tensor_divergence,
                    traceless_symmetric_gradient)
from .transform import ito_reconstruction_check
from .waves import (WaveSpec, apply_A_points, apply_symbol_to_derivs, divergence_residual_points,
                    symbol_A, unit_box)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    ok: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "ok": bool(self.ok),
                "detail": self.detail}


def _le(name, value, threshold, **detail) -> Check:
    value = float(value)
    return Check(name, value, float(threshold), bool(value <= threshold), detail)


# -- stochastics -------------------------------------------------------------------

def check_paths(cfg: RunConfig) -> list[Check]:
    g, nz = cfg.grid, cfg.noise
    worst, monotone = 0.0, True
    for seed in nz.path_seeds:
        base = sample_wiener(seed, g.T, g.dt)
        cert = holder_process(base, nz.a)
        st = stop_path(base, nz.a, nz.M, cert)
        worst = max(worst, discrete_holder_norm(st.values, g.dt, nz.a) / nz.M)
        taus = [stop_path(base, nz.a, f * nz.M, cert).tau_index for f in (0.5, 1, 2, 4)]
        monotone &= all(x <= y for x, y in zip(taus, taus[1:]))
    return [_le("paths.stopped_norm_over_M", worst, 1.0, seeds=len(nz.path_seeds)),
            Check("paths.tau_monotone_in_M", float(monotone), 1.0, monotone)]


# -- torus kernels --------------------------------------------------------------------

def check_kernels(cfg: RunConfig, seed: int = 0) -> list[Check]:
    grid = TorusGrid(cfg.grid.N, min(cfg.grid.res, 32))
    N = grid.dim
    rng = np.random.default_rng(seed)
    X = grid.coords
    m = np.stack([sum(rng.uniform(-1, 1) * np.sin(2 * np.pi * (k + 1) * X[(i + k) % N] + rng.uniform(0, 6))
                      for k in range(3)) for i in range(N)])
    m -= m.mean(axis=tuple(range(1, N + 1)), keepdims=True)
    rhs = tensor_divergence(grid, traceless_symmetric_gradient(grid, m))
    m_rec, _ = solve_elliptic_m(grid, rhs)
    rel = np.abs(m_rec - m).max() / np.abs(m).max()
    u = rng.standard_normal((N,) + grid.shape)
    P1 = helmholtz_project(grid, u).solenoidal
    P2 = helmholtz_project(grid, P1).solenoidal
    idem = np.abs(P2 - P1).max() / max(np.abs(P1).max(), 1e-300)
    div = np.abs(divergence(grid, P1)).max() / max(np.abs(P1).max(), 1e-300)
    return [_le("torus.elliptic_recovery", rel, cfg.tol.elliptic),
            _le("torus.projection_idempotence", idem, cfg.tol.projection),
            _le("torus.projection_divergence", div, cfg.tol.projection * grid.res)]


# -- geometry --------------------------------------------------------------------------

def check_geometry(cfg: RunConfig, table: CalibrationTable, count: int = 16, seed: int = 7) -> list[Check]:
    N = cfg.grid.N
    params = table.selection_params(N)
    pts = sample_interior_points(np.random.default_rng(seed), N, 1.0, count, 0.05)
    reps = [verify_segment(select_segment(p, k, params), p, params) for k, p in enumerate(pts)]
    bad = [k for k, r in enumerate(reps) if not r.ok]
    return [Check("geometry.segment_conditions", float(len(bad)), 0.0, not bad,
                  {"failed": bad, "min_margin_ratio": min(r.min_margin_ratio for r in reps),
                   "min_length_ratio": min(r.length_ratio for r in reps), "c_cal": params.c_cal})]


# -- waves -----------------------------------------------------------------------------

def check_waves(cfg: RunConfig, seed: int = 3) -> list[Check]:
    N = cfg.grid.N
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(N)
    a /= np.linalg.norm(a)
    b = rng.standard_normal(N)
    b /= np.linalg.norm(b)
    lo, hi = unit_box(N)
    spec = WaveSpec(a, b, n=16.0, L=0.3, lo=lo + 0.1, hi=hi - 0.1)
    z = rng.uniform(0, 1, size=(400, N + 1))
    resid = divergence_residual_points(spec, z)
    f = apply_A_points(spec, z)
    scale = max(np.abs(f.w).max(), np.abs(f.V).max()) * spec.n
    d_rel = np.abs(resid).max() / scale
    # exact core: potential u^3/6 along e0 has D^3 = e0 (x) e0 (x) e0
    D3 = np.zeros((N + 1,) * 3)
    D3[0, 0, 0] = 1.0
    w, V = apply_symbol_to_derivs(a, b, D3)
    A = symbol_A(a, b, np.eye(N + 1)[0])
    core = max(np.abs(w - A[0, 1:]).max(), np.abs(V - A[1:, 1:]).max())
    outside = np.concatenate([rng.uniform(0, 0.1, size=(200, N + 1)), rng.uniform(0.9, 1.0, size=(200, N + 1))])
    g = apply_A_points(spec, outside)
    supp = max(np.abs(g.w).max(), np.abs(g.V).max())
    return [_le("waves.divergence_identity", d_rel, 1e-8), _le("waves.exact_core", core, 1e-10),
            _le("waves.compact_support", supp, 0.0)]


# -- oscillatory -------------------------------------------------------------------------

def check_oscillatory(cfg: RunConfig, params: OscillationParams,
                      count: int = 4, seed: int = 11) -> list[Check]:
    N = cfg.grid.N
    pts = sample_interior_points(np.random.default_rng(seed), N, 1.0, count, 0.05)
    worst, zeroed = math.inf, 0
    for k, p in enumerate(pts):
        inc = increment_unit(p.e, p.w, p.H, 64, k, params=params, res=12)
        worst = min(worst, inc.min_deficiency)
        zeroed += int(inc.zeroed)
    return [Check("oscillatory.unit_inclusion", worst, 0.0, worst > 0 and zeroed == 0, {"zeroed": zeroed})]


# -- transform ---------------------------------------------------------------------------

def check_frame(cfg: RunConfig, frame) -> list[Check]:
    return [_le("frame.mass_drift", frame.meta["mass_drift"], cfg.tol.mass, seed=frame.meta["seed"]),
            _le("frame.corrector_mean", frame.meta["rhs_mean_max"], cfg.tol.elliptic),
            Check("frame.density_floor", frame.bounds["r_min"], 0.0, frame.bounds["r_min"] > 0)]


def check_ito(cfg: RunConfig, data, G, path) -> list[Check]:
    grid = data.grid
    X = grid.coords
    phi = np.stack([np.cos(2 * np.pi * X[(i + 1) % grid.dim]) for i in range(grid.dim)])
    rep = ito_reconstruction_check(data, G, path, phi)
    ok = all(1.4 <= r <= 2.6 for r in rep.ratios)
    return [Check("transform.ito_halving", float(min(rep.ratios)), 1.4, ok, rep.as_dict())]


# -- scheme -------------------------------------------------------------------------------

def check_scheme(cfg: RunConfig, result: SchemeResult, label: str = "") -> list[Check]:
    I = np.asarray(result.I_values)
    st = result.state
    chk = x0_checklist(st, cfg.tol.weak, cfg.tol.test_count)
    steps_ok = all(s.checklist.get("ok", False) for s in result.trace if s.accepted)
    return [_le(f"scheme{label}.I_nonpositive", float(I.max()), 1e-12),
            _le(f"scheme{label}.I_monotone", float(max(0.0, -np.diff(I).min(initial=0.0))), 0.0),
            Check(f"scheme{label}.final_checklist", chk.margin, 0.0, chk.ok and steps_ok, chk.as_dict()),
            _le(f"scheme{label}.I_consistent", abs(functional_single(st) - I[-1]), 1e-12)]
