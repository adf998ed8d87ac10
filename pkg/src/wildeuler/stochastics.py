"""Wiener paths, the sup-plus-Hölder process O(t), stopping times and stopped paths.

All suprema are taken over the uniform time grid t_k = k*dt, k = 0..K, so every
bound stated here is a statement about grid values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Time horizon is not an integer multiple of the step."""


class ParameterError(ValueError):
    pass


def grid_size(T: float, dt: float) -> int:
    if T <= 0 or dt <= 0:
        raise GridError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > 1e-12 * max(T, 1.0):
        raise GridError(f"T/dt = {T / dt!r} is not an integer")
    return K


@dataclass(frozen=True)
class WienerPath:
    seed: int
    T: float
    dt: float
    values: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)

    @property
    def K(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True)
class HolderCertificate:
    a: float
    O_values: np.ndarray = field(repr=False)
    exact: bool = True


@dataclass(frozen=True)
class StoppedPath:
    """A Wiener path frozen at the stopping time.

    ``tau_index`` is the first grid index where O exceeds M (or the final index).
    On a grid, O jumps past M at ``tau_index``, so the path is frozen at the last
    admissible index ``freeze_index`` (= tau_index - 1 when M is exceeded). This is
    what makes the discrete C^a bound hold exactly.
    """

    base: WienerPath
    a: float
    M: float
    tau_index: int
    freeze_index: int
    values: np.ndarray = field(repr=False)
    norm: float

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    @property
    def tau(self) -> float:
        return self.tau_index * self.base.dt

    @property
    def exceeded(self) -> bool:
        return self.freeze_index < self.tau_index

    def frozen_mask(self) -> np.ndarray:
        return np.arange(self.values.size) > self.freeze_index


def sample_wiener(seed: int, T: float, dt: float, rng=None) -> WienerPath:
    """Gaussian-increment Wiener path with beta(0) = 0.

    ``rng`` may be passed to override the seeded generator (anything with a
    ``standard_normal(size)`` method).
    """
    K = grid_size(T, dt)
    if rng is None:
        rng = np.random.default_rng(seed)
    incr = np.asarray(rng.standard_normal(K), dtype=float) * np.sqrt(dt)
    values = np.concatenate([[0.0], np.cumsum(incr)])
    values.setflags(write=False)
    return WienerPath(seed=int(seed), T=float(T), dt=float(dt), values=values)


def _check_exponent(a: float) -> None:
    if not 0.0 < a < 0.5:
        raise ParameterError(f"Hölder exponent must lie in (0, 1/2), got {a}")


def holder_quotients(values: np.ndarray, dt: float, a: float, window: int | None = None,
                     block: int = 512) -> np.ndarray:
    """q[k] = max_{i<k} |b_k - b_i| / ((k-i) dt)^a  (restricted to k-i <= window)."""
    b = np.asarray(values, dtype=float)
    K1 = b.size
    q = np.zeros(K1)
    lag_pow = (np.arange(1, K1) * dt) ** a
    for start in range(1, K1, block):
        stop = min(start + block, K1)
        ks = np.arange(start, stop)
        lo = 0 if window is None else max(0, start - window)
        i = np.arange(lo, stop - 1)
        lags = ks[:, None] - i[None, :]
        valid = lags > 0
        if window is not None:
            valid &= lags <= window
        diffs = np.abs(b[ks][:, None] - b[i][None, :])
        ratio = np.where(valid, diffs / lag_pow[np.clip(lags - 1, 0, None)], 0.0)
        q[start:stop] = ratio.max(axis=1)
    return q


def holder_process(path: WienerPath, a: float = 0.25, window: int | None = None) -> HolderCertificate:
    """O(t_k) = max_{i<=k}|b_i| + max over grid pairs in [0, t_k] of the Hölder quotient.

    The default is the exact all-pairs scan; ``window`` limits the lag and marks the
    certificate inexact.
    """
    _check_exponent(a)
    b = np.asarray(path.values, dtype=float)
    sup_abs = np.maximum.accumulate(np.abs(b))
    hol = np.maximum.accumulate(holder_quotients(b, path.dt, a, window))
    O = sup_abs + hol
    O[0] = 0.0
    O.setflags(write=False)
    return HolderCertificate(a=float(a), O_values=O, exact=window is None)


def stopping_time(cert: HolderCertificate, M: float) -> int:
    """Smallest grid index with O > M, or the final index if O never exceeds M."""
    if M <= 0:
        raise ParameterError("M must be positive")
    over = np.flatnonzero(cert.O_values > M)
    return int(over[0]) if over.size else cert.O_values.size - 1


def discrete_holder_norm(values: np.ndarray, dt: float, a: float) -> float:
    """sup|b| + all-pairs Hölder seminorm on the grid (brute force)."""
    b = np.asarray(values, dtype=float)
    return float(np.max(np.abs(b)) + holder_quotients(b, dt, a).max(initial=0.0))


def stop_path(path: WienerPath, a: float = 0.25, M: float = 1.0,
              cert: HolderCertificate | None = None) -> StoppedPath:
    _check_exponent(a)
    if cert is None:
        cert = holder_process(path, a)
    tau_index = stopping_time(cert, M)
    exceeded = cert.O_values[tau_index] > M
    freeze = tau_index - 1 if exceeded else tau_index
    idx = np.minimum(np.arange(path.values.size), freeze)
    values = path.values[idx].copy()
    values.setflags(write=False)
    norm = discrete_holder_norm(values, path.dt, a)
    if norm > M * (1 + 1e-12):
        raise AssertionError(f"stopped path norm {norm} exceeds M={M}")
    return StoppedPath(base=path, a=float(a), M=float(M), tau_index=tau_index,
                       freeze_index=freeze, values=values, norm=norm)


def zero_stopped_path(T: float, dt: float, a: float = 0.25, M: float = 1.0) -> StoppedPath:
    """Deterministic beta_M == 0, used for noise-free frames."""
    K = grid_size(T, dt)
    base = WienerPath(seed=-1, T=float(T), dt=float(dt), values=np.zeros(K + 1))
    return stop_path(base, a, M)
