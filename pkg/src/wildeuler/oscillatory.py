"""Oscillatory increments at four levels of generality.

unit      constant coefficients on the unit space-time cube
scaled    constant coefficients with density r on an arbitrary box
piecewise cell-wise constant coefficients on an m-grid of [0,T] x T^N
continuous continuous coefficients, approximated cell-wise from the grid

Every increment is A_ab(d) applied to a localised wave, so the linear constraints
hold by construction; the pointwise inclusion in S[e] is checked on every sample
point, and a cell whose check fails is zeroed (the measured stand-in for n <= n0).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (GeomPoint, SegmentSelection, SelectionError, SelectionParams,
                       s_value, select_segment)
from .torus import SpaceTimeField, TorusGrid
from .waves import CutoffSpec, WaveSpec, apply_A_points, spacetime_points


class PreconditionError(ValueError):
    """Constant state is not inside S[e]."""


class RefinementError(RuntimeError):
    """No admissible cell size reaches the required approximation error."""


@dataclass(frozen=True)
class OscillationParams:
    cutoff: CutoffSpec = CutoffSpec()
    selection: SelectionParams = SelectionParams()
    phase: float = 0.0


@dataclass
class Increment:
    w: np.ndarray                      # (P, N)
    V: np.ndarray                      # (P, N, N)
    selection: SegmentSelection | None
    zeroed: bool                       # inclusion failed, fields set to zero
    remainder_bound: float             # n * sup |full - leading|
    min_deficiency: float              # min over points of e - s_value after the increment
    meta: dict = field(default_factory=dict)


def _select(p: GeomPoint, seed: int, params: SelectionParams) -> tuple[SegmentSelection, bool]:
    try:
        return select_segment(p, seed, params), True
    except SelectionError as err:
        return err.best, False


def _wave_increment(p: GeomPoint, sel: SegmentSelection, n: float, zhat: np.ndarray,
                    lo: np.ndarray, hi: np.ndarray, amp: float, w_cmp: np.ndarray, H_cmp: np.ndarray,
                    e_cmp, params: OscillationParams) -> Increment:
    """Evaluate the wave at normalised points zhat; check inclusion against (w_cmp, H_cmp, e_cmp)."""
    P, N = zhat.shape[0], p.N
    if sel.trivial or sel.L == 0.0:
        zero_w, zero_V = np.zeros((P, N)), np.zeros((P, N, N))
        dmin = float(np.min(e_cmp - s_value(w_cmp, H_cmp))) if P else math.inf
        return Increment(zero_w, zero_V, sel, False, 0.0, dmin)
    spec = WaveSpec(sel.a, sel.b, n=n, L=sel.L, lo=lo, hi=hi, cutoff=params.cutoff, phase=params.phase)
    f = apply_A_points(spec, zhat)
    w_n = amp * f.w
    V_n = f.V
    dmin = float(np.min(e_cmp - s_value(w_cmp + w_n / amp, H_cmp + V_n))) if P else math.inf
    bound = n * f.remainder_sup
    if not dmin > 0:
        return Increment(np.zeros_like(w_n), np.zeros_like(V_n), sel, True, bound,
                         float(np.min(e_cmp - s_value(w_cmp, H_cmp))), {"failed_deficiency": dmin})
    return Increment(w_n, V_n, sel, False, bound, dmin)


def unit_points(N: int, res: int) -> np.ndarray:
    """Cell-centred sample points of the unit space-time cube, (res^(N+1), N+1)."""
    x = (np.arange(res) + 0.5) / res
    return spacetime_points([x] * (N + 1))


def increment_unit(e: float, w, H, n: float, tiebreak_seed: int = 0, points: np.ndarray | None = None,
                   params: OscillationParams = OscillationParams(), res: int = 16) -> Increment:
    """Increment for constant (e, w, H) on the unit cube, sampled at ``points``."""
    p = GeomPoint(np.asarray(w, float), np.asarray(H, float), float(e))
    if p.s_value() > p.e:
        raise PreconditionError("point lies outside the closure of S[e]")
    z = unit_points(p.N, res) if points is None else np.atleast_2d(points)
    sel, ok = _select(p, tiebreak_seed, params.selection)
    d = p.N + 1
    inc = _wave_increment(p, sel, n, z, np.zeros(d), np.ones(d), 1.0, p.w, p.H, p.e, params)
    inc.meta["target_met"] = ok
    return inc


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if np.any(self.hi <= self.lo):
            raise ValueError("degenerate box")
        side = self.hi[1:] - self.lo[1:]
        if not np.allclose(side, side[0]):
            raise ValueError("spatial part of the box must be a cube")

    @property
    def edge(self) -> float:
        return float(self.hi[1] - self.lo[1])

    @property
    def duration(self) -> float:
        return float(self.hi[0] - self.lo[0])


def normalise(box: Box, r: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map physical points to wave coordinates: time by (edge*sqrt r), space by edge.

    Returns (zhat, hi_hat); the normalised box is [0, hi_hat].
    """
    scale = np.full(box.lo.size, box.edge)
    scale[0] = box.edge * math.sqrt(r)
    zhat = (np.atleast_2d(z) - box.lo) / scale
    return zhat, (box.hi - box.lo) / scale


def increment_scaled(e: float, r: float, w, H, box: Box, n: float, tiebreak_seed: int = 0,
                     points: np.ndarray | None = None, params: OscillationParams = OscillationParams(),
                     res: int = 16) -> Increment:
    """Increment for constant (e, r, w, H) on ``box``: w_n = sqrt(r) w_hat, V_n = V_hat.

    The unit construction is run on (e, w/sqrt r, H) in coordinates where time is
    divided by edge*sqrt(r) and space by edge, so d_t w_n + div V_n = 0 still holds.
    """
    if r <= 0:
        raise ValueError("density must be positive")
    sr = math.sqrt(r)
    p = GeomPoint(np.asarray(w, float) / sr, np.asarray(H, float), float(e))
    if p.s_value() > p.e:
        raise PreconditionError("point lies outside the closure of S[e]")
    if points is None:
        points = box.lo + unit_points(p.N, res) * (box.hi - box.lo)
    zhat, hi_hat = normalise(box, r, points)
    sel, ok = _select(p, tiebreak_seed, params.selection)
    inc = _wave_increment(p, sel, n, zhat, np.zeros_like(hi_hat), hi_hat, sr, p.w, p.H, p.e, params)
    inc.meta["target_met"] = ok
    return inc


def energy_ratio(w_n: np.ndarray, r, e, w) -> float:
    """mean |w_n|^2/r divided by (1/sup e) mean (e - |w|^2/(2r))^2."""
    r = np.broadcast_to(np.asarray(r, float), w_n.shape[:-1])
    e = np.broadcast_to(np.asarray(e, float), w_n.shape[:-1])
    w = np.broadcast_to(np.asarray(w, float), w_n.shape)
    num = np.mean(np.sum(w_n ** 2, axis=-1) / r)
    gap = e - 0.5 * np.sum(w ** 2, axis=-1) / r
    den = np.mean(gap ** 2) / np.max(e)
    return float(num / den) if den > 0 else math.inf


# -- partitions ------------------------------------------------------------------

@dataclass(frozen=True)
class GridPartition:
    """Cells [jT/m, (j+1)T/m) x cubes of edge 1/m over a field grid with nt+1 time nodes."""

    grid: TorusGrid
    T: float
    nt: int
    m: int

    def __post_init__(self):
        if self.m < 1 or self.grid.res % self.m or self.nt % self.m:
            raise ValueError(f"m={self.m} must divide res={self.grid.res} and nt={self.nt}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * (self.grid.dim + 1)

    @property
    def steps_per_cell(self) -> int:
        return self.nt // self.m

    @property
    def points_per_cell(self) -> int:
        return self.grid.res // self.m

    def cells(self):
        return np.ndindex(*self.shape)

    def box(self, cell) -> Box:
        j, *i = cell
        lo = np.array([j * self.T / self.m] + [k / self.m for k in i])
        hi = np.array([(j + 1) * self.T / self.m] + [(k + 1) / self.m for k in i])
        return Box(lo, hi)

    def slices(self, cell) -> tuple[slice, ...]:
        """Index slices of the cell in a (nt+1, *space) array; the final time node joins the last cell."""
        j, *i = cell
        st, sp = self.steps_per_cell, self.points_per_cell
        t_stop = (j + 1) * st + (1 if j == self.m - 1 else 0)
        return (slice(j * st, t_stop),) + tuple(slice(k * sp, (k + 1) * sp) for k in i)

    def cell_points(self, cell, times: np.ndarray) -> np.ndarray:
        sl = self.slices(cell)
        axes = [times[sl[0]]] + [np.arange(self.grid.res)[s] / self.grid.res for s in sl[1:]]
        return spacetime_points(axes)

    def cell_seed(self, seed: int, cell) -> int:
        return int(np.random.SeedSequence([int(seed), *map(int, cell)]).generate_state(1)[0])


@dataclass
class CoefficientField:
    """Space-time coefficients on the field grid: arrays with time axis first."""

    grid: TorusGrid
    times: np.ndarray
    e: np.ndarray        # (nt+1, *space)
    r: np.ndarray        # (nt+1, *space)
    w: np.ndarray        # (nt+1, N, *space)
    H: np.ndarray        # (nt+1, N, N, *space)
    bounds: dict = field(default_factory=dict)

    @property
    def nt(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def pointwise(self):
        """Arrays moved to point-major layout: (..., N) and (..., N, N)."""
        N = self.grid.dim
        w = np.moveaxis(self.w, 1, -1)
        H = np.moveaxis(np.moveaxis(self.H, 1, -1), 1, -1)
        return self.e, self.r, w, H

    def s_field(self) -> np.ndarray:
        e, r, w, H = self.pointwise()
        return s_value(w / np.sqrt(r)[..., None], H)

    def margin(self) -> float:
        return float(np.min(self.e - self.s_field()))


@dataclass
class PiecewiseCoefficients:
    partition: GridPartition
    e: np.ndarray        # (*cells)
    r: np.ndarray
    w: np.ndarray        # (*cells, N)
    H: np.ndarray        # (*cells, N, N)
    delta_ap: float = 0.0
    hashes: dict = field(default_factory=dict)

    def broadcast(self):
        """Cell values expanded to the field grid (nt+1, *space) point-major."""
        part = self.partition
        st, sp = part.steps_per_cell, part.points_per_cell
        N = part.grid.dim

        def expand(a, tail):
            out = a
            for ax in range(N + 1):
                out = np.repeat(out, st if ax == 0 else sp, axis=ax)
            last = out[-1:]
            return np.concatenate([out, last], axis=0)

        return (expand(self.e, 0), expand(self.r, 0), expand(self.w, 1), expand(self.H, 2))


def _hash_arrays(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def approx_piecewise(coeffs: CoefficientField, m: int) -> PiecewiseCoefficients:
    """Cell values from the cell's initial time: sup of e over the cube, corner samples of r, w, H."""
    part = GridPartition(coeffs.grid, coeffs.T, coeffs.nt, m)
    N = coeffs.grid.dim
    e, r, w, H = coeffs.pointwise()
    st, sp = part.steps_per_cell, part.points_per_cell
    t_idx = np.arange(m) * st
    corner = np.arange(m) * sp
    e0 = e[t_idx]
    # sup over each cube at the initial time of the cell
    blocks = e0.reshape((m,) + sum(((m, sp) for _ in range(N)), ()))
    e_m = blocks.max(axis=tuple(range(2, 2 * N + 1, 2)))
    ix = np.ix_(t_idx, *([corner] * N))
    r_m = r[ix]
    w_m = w[ix]
    H_m = H[ix]
    pc = PiecewiseCoefficients(part, e_m, r_m, w_m, H_m)
    for cell in part.cells():
        j = cell[0]
        pc.hashes[cell] = {"t_index": int(j * st), "t": float(coeffs.times[j * st]),
                           "hash": _hash_arrays(e_m[cell], r_m[cell], w_m[cell], H_m[cell])}
    eb, rb, wb, Hb = pc.broadcast()
    pc.delta_ap = float(max(np.abs(eb - e).max(), np.abs(rb - r).max(),
                            np.abs(wb - w).max(), np.abs(Hb - H).max()))
    return pc


@dataclass
class FieldIncrement:
    w: np.ndarray          # (nt+1, N, *space)
    V: np.ndarray          # (nt+1, N, N, *space)
    zeroed_cells: list
    below_target_cells: list
    remainder_bound: float
    min_deficiency: float
    audit: dict
    meta: dict = field(default_factory=dict)


def _to_field_layout(arr: np.ndarray, N: int) -> np.ndarray:
    """(nt+1, *space, comps...) -> (nt+1, comps..., *space)."""
    ncomp = arr.ndim - (N + 1)
    return np.moveaxis(arr, tuple(range(N + 1, arr.ndim)), tuple(range(1, 1 + ncomp)))


def increment_piecewise(pc: PiecewiseCoefficients, times: np.ndarray, n: float, seed: int = 0,
                        params: OscillationParams = OscillationParams(),
                        check: tuple[np.ndarray, ...] | None = None, level_shift: float = 0.0) -> FieldIncrement:
    """Sum of per-cell scaled increments (disjoint supports).

    Each cell uses its own values at level e_cell - level_shift. Inclusion is checked
    against ``check`` = (e, r, w, H) point-major fields when given (true coefficients),
    otherwise against the cell values themselves.
    """
    part = pc.partition
    N = part.grid.dim
    shape = (times.size,) + part.grid.shape
    w_out = np.zeros(shape + (N,))
    V_out = np.zeros(shape + (N, N))
    zeroed, below, audit = [], [], {}
    rem, dmin = 0.0, math.inf
    for cell in part.cells():
        sl = part.slices(cell)
        z = part.cell_points(cell, times)
        level = float(pc.e[cell]) - level_shift
        r_c = float(pc.r[cell])
        sr = math.sqrt(r_c)
        p = GeomPoint(pc.w[cell] / sr, pc.H[cell], level) if level > 0 else None
        cseed = part.cell_seed(seed, cell)
        audit[cell] = dict(pc.hashes.get(cell, {}), seed=cseed)
        if p is None or p.s_value() >= level:
            audit[cell]["trivial"] = True
            continue
        if check is None:
            e_cmp = np.full(z.shape[0], level)
            w_cmp = np.broadcast_to(p.w, (z.shape[0], N))
            H_cmp = np.broadcast_to(p.H, (z.shape[0], N, N))
            amp_cmp = np.full(z.shape[0], sr)
        else:
            ce, cr, cw, cH = (a[sl].reshape((-1,) + a.shape[N + 1:]) for a in check)
            e_cmp, amp_cmp = ce, np.sqrt(cr)
            w_cmp = cw / amp_cmp[:, None]
            H_cmp = cH
        sel, ok = _select(p, cseed, params.selection)
        zhat, hi_hat = normalise(part.box(cell), r_c, z)
        inc = _wave_increment(p, sel, n, zhat, np.zeros_like(hi_hat), hi_hat, sr, p.w, p.H, level, params)
        if not inc.zeroed and check is not None and np.any(inc.w):
            d_true = float(np.min(e_cmp - s_value(w_cmp + inc.w / amp_cmp[:, None], H_cmp + inc.V)))
            if not d_true > 0:
                inc = Increment(np.zeros_like(inc.w), np.zeros_like(inc.V), sel, True,
                                inc.remainder_bound, d_true)
            else:
                inc.min_deficiency = d_true
        if inc.zeroed:
            zeroed.append(cell)
        if not ok:
            below.append(cell)
        audit[cell].update(L=float(sel.L), zeroed=inc.zeroed)
        rem = max(rem, inc.remainder_bound)
        w_out[sl] = inc.w.reshape(w_out[sl].shape)
        V_out[sl] = inc.V.reshape(V_out[sl].shape)
    if check is not None:
        ce, cr, cw, cH = check
        s_new = s_value((cw + w_out) / np.sqrt(cr)[..., None], cH + V_out)
        dmin = float(np.min(ce - s_new))
    else:
        eb, rb, wb, Hb = pc.broadcast()
        dmin = float(np.min(eb - level_shift - s_value((wb + w_out) / np.sqrt(rb)[..., None], Hb + V_out)))
    return FieldIncrement(_to_field_layout(w_out, N), _to_field_layout(V_out, N), zeroed, below, rem,
                          dmin, audit, {"m": part.m, "n": n})


def candidate_m(grid: TorusGrid, nt: int, min_points: int = 4) -> list[int]:
    """Powers of two dividing res and nt, keeping at least ``min_points`` samples per cell edge."""
    out, m = [], 1
    while grid.res % m == 0 and nt % m == 0 and grid.res // m >= min_points:
        out.append(m)
        m *= 2
    return out


def increment_continuous(coeffs: CoefficientField, delta: float, n: float, seed: int = 0,
                         params: OscillationParams = OscillationParams(), min_points: int = 4,
                         m: int | None = None) -> tuple[FieldIncrement, float, dict]:
    """Increment for continuous coefficients with margin ``delta``.

    Picks the smallest m with delta_ap < delta/4, builds cell values at level
    e_m - delta/2, and checks the inclusion against the true coefficients. Returns
    (increment, delta_n, report).
    """
    margin = coeffs.margin()
    if not margin >= delta * (1 - 1e-12):
        raise PreconditionError(f"coefficient margin {margin:.4g} below delta={delta:.4g}")
    tried = {}
    choices = [m] if m is not None else candidate_m(coeffs.grid, coeffs.nt, min_points)
    pc = None
    for mm in choices:
        cand = approx_piecewise(coeffs, mm)
        tried[mm] = cand.delta_ap
        if cand.delta_ap < delta / 4:
            pc = cand
            break
    if pc is None:
        raise RefinementError(f"delta_ap {tried} never below delta/4 = {delta / 4:.4g}; use a finer grid")
    e, r, w, H = coeffs.pointwise()
    inc = increment_piecewise(pc, coeffs.times, n, seed, params, check=(e, r, w, H), level_shift=delta / 2)
    w_pm = np.moveaxis(inc.w, 1, -1)
    report = {"m": pc.partition.m, "delta_ap": pc.delta_ap, "delta_n": inc.min_deficiency,
              "oscil_ratio": energy_ratio(w_pm, r, e, w), "zeroed_cells": len(inc.zeroed_cells),
              "below_target_cells": len(inc.below_target_cells), "remainder_bound": inc.remainder_bound,
              "tried": {str(k): v for k, v in tried.items()}}
    return inc, inc.min_deficiency, report


def weak_pairing(w_n: np.ndarray, g: np.ndarray, cell_volume: float) -> float:
    """Quadrature of w_n . g over the sampled points (rectangle rule)."""
    return float(np.sum(w_n * g) * cell_volume)


def loglog_slope(ns, values) -> float:
    ns = np.asarray(ns, float)
    v = np.abs(np.asarray(values, float))
    return float(np.polyfit(np.log(ns), np.log(v), 1)[0])


def _smooth_random(grid: TorusGrid, times: np.ndarray, rng: np.random.Generator, modes: int = 3) -> np.ndarray:
    """Sum of a few unit-amplitude low-mode travelling cosines, normalised to sup 1."""
    X = grid.coords
    out = np.zeros((times.size,) + grid.shape)
    for _ in range(modes):
        k = rng.integers(-1, 2, size=grid.dim)
        omega, ph = rng.uniform(-np.pi, np.pi, size=2)
        arg = 2 * np.pi * sum(ki * x for ki, x in zip(k, X))
        out += np.cos(arg[None] + (omega * times).reshape((-1,) + (1,) * grid.dim) + ph)
    return out / max(np.abs(out).max(), 1e-300)


def random_coefficient_field(grid: TorusGrid, times: np.ndarray, rng: np.random.Generator, delta: float = 0.2,
                             amp: float = 0.03, base: float = 0.5, r_amp: float = 0.05) -> CoefficientField:
    """Smooth random (r, w, H) around a random constant state; constant e with margin delta + 0.01."""
    N = grid.dim
    w0 = rng.uniform(-base, base, size=N)
    H0 = rng.standard_normal((N, N)) * 0.5 * base
    H0 = 0.5 * (H0 + H0.T)
    H0 -= np.trace(H0) / N * np.eye(N)
    r = 1.0 + r_amp * _smooth_random(grid, times, rng)
    w = np.stack([w0[i] + amp * _smooth_random(grid, times, rng) for i in range(N)], axis=1)
    H = np.zeros((times.size, N, N) + grid.shape)
    for i in range(N):
        for j in range(i, N):
            H[:, i, j] = H0[i, j] + amp * _smooth_random(grid, times, rng)
            H[:, j, i] = H[:, i, j]
    H[:, N - 1, N - 1] = -sum(H[:, i, i] for i in range(N - 1))
    co = CoefficientField(grid, times, np.zeros_like(r), r, w, H)
    co.e = np.full(r.shape, float(co.s_field().max()) + delta + 0.01)
    co.bounds = {"r_min": float(r.min()), "r_max": float(r.max()), "e_max": float(co.e.max())}
    return co


def slice_pairings(p: GeomPoint, ns, g, times=(0.3, 0.5, 0.7), res: int = 128, seed: int = 0,
                   params: OscillationParams = OscillationParams(), raw: bool = True) -> list[float]:
    """sup over the given time slices of |int w_n(t, x) . g(x) dx| on the unit cube, per n.

    ``g(x)`` maps points (P, N) to vectors (P, N). With ``raw`` the wave is paired
    without the inclusion cut-off, so every n contributes; otherwise increments
    zeroed below the admissible frequency give 0.
    """
    x = (np.arange(res) + 0.5) / res
    sel, _ = _select(p, seed, params.selection)
    d = p.N + 1
    out = []
    for n in ns:
        best = 0.0
        for t in times:
            z = spacetime_points([np.array([t])] + [x] * p.N)
            if raw:
                if sel.trivial or sel.L == 0.0:
                    w = np.zeros((z.shape[0], p.N))
                else:
                    spec = WaveSpec(sel.a, sel.b, n=n, L=sel.L, lo=np.zeros(d), hi=np.ones(d),
                                    cutoff=params.cutoff, phase=params.phase)
                    w = apply_A_points(spec, z).w
            else:
                w = increment_unit(p.e, p.w, p.H, n, seed, z, params).w
            best = max(best, abs(float(np.sum(w * g(z[:, 1:])))) / res ** p.N)
        out.append(best)
    return out


def decay_slope(ns, values) -> tuple[float, int]:
    """Log-log slope over the nonzero values, and how many entered the fit."""
    ns = np.asarray(ns, float)
    v = np.abs(np.asarray(values, float))
    keep = v > 0
    if keep.sum() < 2:
        return math.nan, int(keep.sum())
    return loglog_slope(ns[keep], v[keep]), int(keep.sum())
