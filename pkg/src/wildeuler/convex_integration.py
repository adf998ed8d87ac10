"""Subsolutions of the abstract Euler system and the augmentation loop.

A state (v, F, e, delta) is a subsolution when v(0) = v0, div v = 0,
d_t v + div F = 0 and (N/2) lambda_max[(v+h)(x)(v+h)/r - F + M] < e - delta pointwise.
The functional I = int int (|v+h|^2/(2r) - e) is <= 0 on subsolutions and each
accepted augmentation step raises it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import s_value
from .oscillatory import (CoefficientField, OscillationParams, PreconditionError, RefinementError,
                          increment_continuous)
from .torus import divergence, integrate, integrate_time
from .transform import AbstractEulerFrame, trig_family, vector_tests


@dataclass
class SubsolutionState:
    frame: AbstractEulerFrame
    v: np.ndarray              # (nt+1, N, *space)
    F: np.ndarray              # (nt+1, N, N, *space)
    e: float
    delta: float
    M: np.ndarray              # corrector in force for this v
    audit: list = field(default_factory=list)

    @property
    def grid(self):
        return self.frame.grid

    @property
    def times(self):
        return self.frame.times

    def pointwise(self):
        """(w, H) point-major with w = (v+h)/sqrt(r), H = F - M."""
        fr = self.frame
        w = np.moveaxis((self.v + fr.h) / np.sqrt(fr.r)[:, None], 1, -1)
        H = np.moveaxis(np.moveaxis(self.F - self.M, 1, -1), 1, -1)
        return w, H

    def s_field(self) -> np.ndarray:
        w, H = self.pointwise()
        return s_value(w, H)

    def margin(self) -> float:
        return float(np.min(self.e - self.s_field()))


def _broadcast_time(a: np.ndarray, nt1: int) -> np.ndarray:
    return np.broadcast_to(a, (nt1,) + a.shape).copy()


def initial_subsolution(frame: AbstractEulerFrame, delta0: float = 0.2, margin: float = 0.05,
                        e: float | None = None) -> SubsolutionState:
    """v = v0 for all t, F = 0, e = max s + delta0 + margin (or the given shared e)."""
    nt1, N = frame.times.size, frame.N
    v = _broadcast_time(frame.v0, nt1)
    F = np.zeros((nt1, N, N) + frame.grid.shape)
    M = frame.M_of(v)
    st = SubsolutionState(frame, v, F, 0.0, 0.0, M)
    s_max = float(st.s_field().max())
    st.e = s_max + delta0 + margin if e is None else float(e)
    st.delta = st.margin()
    if not st.delta >= delta0:
        raise PreconditionError(f"initial margin {st.delta:.4g} below delta0={delta0}")
    return st


def required_energy(frame: AbstractEulerFrame) -> float:
    """max over the grid of the s-field of the initial subsolution."""
    nt1, N = frame.times.size, frame.N
    v = _broadcast_time(frame.v0, nt1)
    st = SubsolutionState(frame, v, np.zeros((nt1, N, N) + frame.grid.shape), 0.0, 0.0, frame.M_of(v))
    return float(st.s_field().max())


@dataclass
class FunctionalValue:
    I: float
    per_path: list

    def as_dict(self):
        return {"I": self.I, "per_path": self.per_path}


def functional_single(state: SubsolutionState) -> float:
    fr = state.frame
    dens = 0.5 * np.sum((state.v + fr.h) ** 2, axis=1) / fr.r - state.e
    return float(integrate_time(integrate(fr.grid, dens), fr.times[1] - fr.times[0]))


def functional_I(states, tol: float = 1e-9) -> FunctionalValue:
    states = states if isinstance(states, (list, tuple)) else [states]
    vals = [functional_single(s) for s in states]
    I = float(np.mean(vals))
    if I > tol:
        raise AssertionError(f"I = {I} > 0 on a subsolution")
    return FunctionalValue(I, vals)


# -- subsolution checklist -----------------------------------------------------------

@dataclass
class ChecklistReport:
    initial: float
    div_weak: float
    div_spectral: float
    equation_weak: float
    margin: float
    range_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return (self.initial == 0.0 and self.div_weak <= self.tol and self.equation_weak <= self.tol
                and self.margin > 0 and self.range_ok)

    def as_dict(self):
        return dict(self.__dict__) | {"ok": self.ok}


def linear_residuals(grid, times, v, F, count: int = 25) -> tuple[float, float, float]:
    """(weak div v, spectral div v, weak d_t v + div F) relative residuals.

    The weak equation uses test functions sin(pi t/T) g_k e_i, which vanish at both ends
    of the time interval.
    """
    N = grid.dim
    T = times[-1] - times[0]
    dt = times[1] - times[0]
    fam = trig_family(grid, count)
    vec = vector_tests(grid, count)
    grads = np.stack([np.stack([np.real(grid.ifft(1j * k * grid.fft(g))) for k in grid.wavenumbers]) for g in fam])
    vnorm = max(float(np.abs(v).max()), 1e-300)
    div_w = integrate(grid, np.einsum("tn...,pn...->tp...", v, grads))
    div_weak = float(np.abs(div_w).max() / (vnorm * max(np.abs(grads).max(), 1.0)))
    dv = np.stack([divergence(grid, v[k]) for k in range(times.size)])
    div_spec = float(np.abs(dv).max() / (vnorm * grid.res))
    theta = np.sin(np.pi * (times - times[0]) / T)
    dtheta = np.pi / T * np.cos(np.pi * (times - times[0]) / T)
    gradv = np.stack([np.stack([np.stack([np.real(grid.ifft(1j * k * grid.fft(g[i]))) for k in grid.wavenumbers])
                                for i in range(N)]) for g in vec])         # (Q, N, N, *space)
    a = integrate(grid, np.einsum("tn...,qn...->tq...", v, vec))
    b = integrate(grid, np.einsum("tij...,qij...->tq...", F, gradv))
    res = integrate_time(dtheta[:, None] * a + theta[:, None] * b, dt)
    scale = integrate_time(np.abs(dtheta[:, None] * a) + np.abs(theta[:, None] * b), dt)
    eq = float(np.max(np.abs(res) / (1.0 + scale)))
    return div_weak, div_spec, eq


def x0_checklist(state: SubsolutionState, tol: float = 1e-3, count: int = 25) -> ChecklistReport:
    fr = state.frame
    init = float(np.abs(state.v[0] - fr.v0).max())
    div_weak, div_spec, eq = linear_residuals(fr.grid, fr.times, state.v, state.F, count)
    margin = state.margin()
    bound = math.sqrt(2 * state.e * float(fr.r.max())) * (1 + 1e-9)
    range_ok = bool(np.sqrt(np.sum((state.v + fr.h) ** 2, axis=1)).max() <= bound)
    return ChecklistReport(init, div_weak, div_spec, eq, margin, range_ok, tol)


# -- augmentation -----------------------------------------------------------------------

@dataclass
class StepReport:
    n: float
    seed: int
    accepted: bool
    I_before: float
    I_after: float
    gain: float
    delta: float
    reason: str = ""
    increment: dict = field(default_factory=dict)
    checklist: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(self.__dict__)


def coefficients(state: SubsolutionState) -> CoefficientField:
    fr = state.frame
    return CoefficientField(fr.grid, fr.times, np.full(fr.r.shape, state.e), fr.r,
                            state.v + fr.h, state.F - state.M, bounds=dict(fr.bounds))


def augment(state: SubsolutionState, n: float, seed: int, params: OscillationParams = OscillationParams(),
            min_points: int = 4) -> tuple[SubsolutionState, StepReport]:
    """One oscillatory step; a rejected step returns the state unchanged."""
    I0 = functional_single(state)
    try:
        inc, delta_n, rep = increment_continuous(coefficients(state), state.delta, n, seed, params, min_points)
    except (RefinementError, PreconditionError) as err:
        return state, StepReport(n, seed, False, I0, I0, 0.0, state.delta, reason=str(err))
    v = state.v + inc.w
    F = state.F + inc.V
    M = state.frame.M_of(v)
    new = SubsolutionState(state.frame, v, F, state.e, delta_n, M, state.audit + [
        {"n": n, "seed": seed, "m": rep["m"], "cells": {str(k): a for k, a in inc.audit.items()}}])
    if state.frame.kind == "multiplicative":
        new.delta = new.margin()
        if not new.delta > 0:
            return state, StepReport(n, seed, False, I0, I0, 0.0, state.delta,
                                     reason=f"margin collapsed to {new.delta:.3g} after corrector recompute",
                                     increment=rep)
    I1 = functional_single(new)
    if not np.any(inc.w):
        return state, StepReport(n, seed, False, I0, I0, 0.0, state.delta, reason="zero increment", increment=rep)
    return new, StepReport(n, seed, True, I0, I1, I1 - I0, new.delta, increment=rep)


@dataclass
class SchemeResult:
    state: SubsolutionState
    trace: list
    stalled: bool
    converged: bool
    I_values: list

    def as_dict(self):
        return {"trace": [t.as_dict() for t in self.trace], "stalled": self.stalled,
                "converged": self.converged, "I_values": self.I_values}


def run_scheme(state: SubsolutionState, schedule, tol: float, gain_floor: float = 0.0,
               params: OscillationParams = OscillationParams(), check_tol: float = 1e-3,
               stall_after: int = 3, min_points: int = 4) -> SchemeResult:
    """Iterate ``augment`` along the (n, seed) schedule until |I| < tol or the schedule ends."""
    schedule = list(schedule)
    if not schedule:
        raise ValueError("empty schedule")
    ns = [n for n, _ in schedule]
    if any(b < a for a, b in zip(ns, ns[1:])):
        raise ValueError("schedule frequencies must be non-decreasing")
    trace, I_vals = [], [functional_single(state)]
    misses = 0
    for n, seed in schedule:
        if abs(I_vals[-1]) < tol:
            break
        new, rep = augment(state, n, seed, params, min_points)
        if rep.accepted:
            rep.checklist = x0_checklist(new, check_tol).as_dict()
            if not rep.checklist["ok"]:
                # under-resolved increment: the new state leaves the subsolution set
                rep.accepted, rep.I_after, rep.gain = False, rep.I_before, 0.0
                rep.delta, rep.reason = state.delta, "checklist failed after increment"
                new = state
        state = new
        trace.append(rep)
        I_vals.append(rep.I_after)
        misses = misses + 1 if (not rep.accepted or rep.gain <= gain_floor) else 0
        if misses >= stall_after:
            return SchemeResult(state, trace, True, False, I_vals)
    return SchemeResult(state, trace, False, abs(I_vals[-1]) < tol, I_vals)


def fit_gain_model(I_values, gains) -> float:
    """Least-squares kappa in gain_k = kappa I_k^2 over accepted steps."""
    I = np.asarray(I_values, float)
    g = np.asarray(gains, float)
    keep = g > 0
    if not keep.any():
        return 0.0
    return float(np.sum(g[keep] * I[keep] ** 2) / np.sum(I[keep] ** 4))


# -- distances and the demonstration ---------------------------------------------------

def relative_l2(grid, times, v1, v2) -> float:
    dt = times[1] - times[0]
    n = lambda a: math.sqrt(integrate_time(integrate(grid, np.sum(a ** 2, axis=1)), dt))
    denom = max(n(v1), n(v2))
    return n(v1 - v2) / denom if denom > 0 else 0.0


def weak_metric_D(grid, v1, v2, count: int = 25) -> float:
    """sum_k 2^-k |<v1-v2, g_k>| / (1 + |...|), supremum over time; lists are averaged."""
    if isinstance(v1, (list, tuple)):
        return float(np.mean([weak_metric_D(grid, a, b, count) for a, b in zip(v1, v2)]))
    tests = vector_tests(grid, count)
    diff = np.asarray(v1) - np.asarray(v2)
    pair = integrate(grid, np.einsum("tn...,kn...->tk...", diff, tests))
    w = 2.0 ** -np.arange(1, tests.shape[0] + 1)
    d = np.sum(w * np.abs(pair) / (1 + np.abs(pair)), axis=1)
    return float(d.max())


@dataclass
class DemoResult:
    seeds: list
    results: list
    distances: np.ndarray
    initial_equal: bool

    def as_dict(self):
        return {"seeds": self.seeds, "distances": self.distances.tolist(), "initial_equal": self.initial_equal,
                "runs": [r.as_dict() for r in self.results]}


def seeded_schedule(ns, seed: int):
    return [(n, int(np.random.SeedSequence([int(seed), k]).generate_state(1)[0])) for k, n in enumerate(ns)]


def nonuniqueness_demo(frame: AbstractEulerFrame, seeds, ns, tol: float, delta0: float = 0.2,
                       params: OscillationParams = OscillationParams(), **kw) -> DemoResult:
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    results = []
    for s in seeds:
        st = initial_subsolution(frame, delta0)
        results.append(run_scheme(st, seeded_schedule(ns, s), tol, params=params, **kw))
    k = len(seeds)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dist[i, j] = dist[j, i] = relative_l2(frame.grid, frame.times, results[i].state.v, results[j].state.v)
    same0 = all(np.array_equal(r.state.v[0], frame.v0) for r in results)
    return DemoResult(list(seeds), results, dist, same0)
