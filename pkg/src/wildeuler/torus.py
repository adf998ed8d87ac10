"""Periodic fields on the flat torus [0,1)^N with spectral calculus.

Array layout: the spatial axes are always the trailing N axes. A scalar field
has shape (*lead, res, ..., res), a vector field (*lead, N, res, ...), a tensor
field (*lead, N, N, res, ...). ``lead`` is usually empty or a time axis.

All first-order operators share one wavenumber vector whose Nyquist entry is
zeroed, so div(grad) == laplacian and the Helmholtz split is exact mode by mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class MeanError(ValueError):
    """Right-hand side of the corrector system has non-zero spatial mean."""


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    res: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.res < 8 or self.res & (self.res - 1):
            raise ValueError("res must be a power of two >= 8")

    @property
    def spacing(self) -> float:
        return 1.0 / self.res

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.res,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.res) / self.res
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers 2*pi*k per axis, Nyquist entry zeroed, broadcast-ready."""
        k = 2 * np.pi * np.fft.fftfreq(self.res, d=1.0 / self.res)
        k[self.res // 2] = 0.0
        out = []
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = self.res
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k ** 2 for k in self.wavenumbers)

    def fft(self, f):
        return np.fft.fftn(f, axes=self.axes)

    def ifft(self, f_hat):
        return np.fft.ifftn(f_hat, axes=self.axes).real


# -- spectral calculus -------------------------------------------------------

def derivative(grid: TorusGrid, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """d^order f / dx_axis^order (axis counts spatial axes, 0-based)."""
    k = grid.wavenumbers[axis]
    return grid.ifft((1j * k) ** order * grid.fft(f))


def gradient(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    f_hat = grid.fft(f)
    return np.stack([grid.ifft(1j * k * f_hat) for k in grid.wavenumbers], axis=-grid.dim - 1)


def vector_gradient(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    """G[..., i, j, x] = d_j u_i."""
    u_hat = grid.fft(u)
    return np.stack([grid.ifft(1j * k * u_hat) for k in grid.wavenumbers], axis=-grid.dim - 1)


def divergence(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    """Divergence of a vector field (component axis just before the spatial axes)."""
    N = grid.dim
    u_hat = grid.fft(u)
    acc = sum(1j * grid.wavenumbers[j] * u_hat[(Ellipsis, j) + (slice(None),) * N] for j in range(N))
    return grid.ifft(acc)


def tensor_divergence(grid: TorusGrid, A: np.ndarray) -> np.ndarray:
    """(div A)_i = sum_j d_j A_ij."""
    N = grid.dim
    A_hat = grid.fft(A)
    sl = (slice(None),) * N
    out = []
    for i in range(N):
        out.append(sum(1j * grid.wavenumbers[j] * A_hat[(Ellipsis, i, j) + sl] for j in range(N)))
    return grid.ifft(np.stack(out, axis=-N - 1))


def laplacian(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    return grid.ifft(-grid.k2 * grid.fft(f))


# -- Helmholtz projection ----------------------------------------------------

@dataclass(frozen=True)
class HelmholtzSplit:
    solenoidal: np.ndarray
    potential: np.ndarray
    mean: np.ndarray = field(repr=False)


def helmholtz_project(grid: TorusGrid, u: np.ndarray) -> HelmholtzSplit:
    """u = solenoidal + grad(potential) + mean, solenoidal divergence-free with zero mean.

    ``u`` has shape (*lead, N, res, ...); ``mean`` is the spatial average, shape (*lead, N).
    """
    N = grid.dim
    u = np.asarray(u, dtype=float)
    u_hat = grid.fft(u)
    ks = grid.wavenumbers
    k2 = grid.k2
    safe = np.where(k2 > 0, k2, 1.0)
    comp = (slice(None),) * N
    kdotu = sum(ks[j] * u_hat[(Ellipsis, j) + comp] for j in range(N))
    phi_hat = np.where(k2 > 0, -1j * kdotu / safe, 0.0)
    grad_hat = np.stack([1j * ks[j] * phi_hat for j in range(N)], axis=-N - 1)
    sol_hat = u_hat - grad_hat
    origin = (Ellipsis, slice(None)) + (0,) * N
    mean = (sol_hat[origin].real / grid.res ** N).copy()
    sol_hat[origin] = 0.0
    return HelmholtzSplit(solenoidal=grid.ifft(sol_hat), potential=grid.ifft(phi_hat), mean=mean)


# -- corrector tensor --------------------------------------------------------

def traceless_symmetric_gradient(grid: TorusGrid, m: np.ndarray) -> np.ndarray:
    """grad m + grad^t m - (2/N) div m I, symmetric by construction."""
    N = grid.dim
    G = vector_gradient(grid, m)
    sym = G + np.swapaxes(G, -N - 2, -N - 1)
    tr = sum(G[(Ellipsis, i, i) + (slice(None),) * N] for i in range(N))
    for i in range(N):
        sym[(Ellipsis, i, i) + (slice(None),) * N] -= (2.0 / N) * tr
    return symmetrize(sym, N)


def symmetrize(A: np.ndarray, N: int) -> np.ndarray:
    """Copy the upper triangle onto the lower one so symmetry is exact.

    Layout (*lead, N, N, *space) with N spatial axes.
    """
    A = np.array(A, dtype=float, copy=True)
    sp = (slice(None),) * N
    for i in range(N):
        for j in range(i + 1, N):
            A[(Ellipsis, j, i) + sp] = A[(Ellipsis, i, j) + sp]
    return A


def elliptic_operator(grid: TorusGrid, m: np.ndarray) -> np.ndarray:
    """div[grad m + grad^t m - (2/N) div m I]."""
    return tensor_divergence(grid, traceless_symmetric_gradient(grid, m))


def solve_elliptic_m(grid: TorusGrid, rhs: np.ndarray, mean_tol: float = 1e-10):
    """Solve div[grad m + grad^t m - (2/N) div m I] = rhs for zero-mean m.

    Returns (m, Mtensor). The per-mode symbol is -(|k|^2 I + (1 - 2/N) k k^T); it is
    inverted in closed form along and across k.
    """
    N = grid.dim
    rhs = np.asarray(rhs, dtype=float)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    mean = rhs.reshape(rhs.shape[: rhs.ndim - N] + (-1,)).mean(axis=-1)
    if np.max(np.abs(mean)) > mean_tol * scale:
        raise MeanError(f"rhs spatial mean {np.max(np.abs(mean)):.3e} exceeds tolerance")
    r_hat = grid.fft(rhs)
    ks = grid.wavenumbers
    k2 = grid.k2
    safe = np.where(k2 > 0, k2, 1.0)
    comp = (slice(None),) * N
    kdotr = sum(ks[j] * r_hat[(Ellipsis, j) + comp] for j in range(N))
    par_factor = 1.0 / (2.0 - 2.0 / N)
    m_hat = []
    for i in range(N):
        ri = r_hat[(Ellipsis, i) + comp]
        par = ks[i] * kdotr / safe
        m_hat.append(np.where(k2 > 0, -(ri - par) / safe - par_factor * par / safe, 0.0))
    m = grid.ifft(np.stack(m_hat, axis=-N - 1))
    return m, traceless_symmetric_gradient(grid, m)


# -- quadrature ----------------------------------------------------------------

def integrate(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Rectangle rule over T^N (spectrally accurate for smooth periodic f)."""
    return np.asarray(f).sum(axis=grid.axes) * grid.cell_volume


def integrate_time(values: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """Composite trapezoid rule on a uniform time grid."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if v.shape[0] < 2:
        return np.zeros(v.shape[1:])
    return dt * (v.sum(axis=0) - 0.5 * (v[0] + v[-1]))


def integrate_spacetime(grid: TorusGrid, f: np.ndarray, dt: float) -> float:
    """Time axis first, trapezoid in time and rectangle rule in space."""
    return float(integrate_time(integrate(grid, f), dt))


def cumulative_time_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoid integral along axis 0, starting from 0."""
    v = np.asarray(values, dtype=float)
    out = np.zeros_like(v)
    if v.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]), axis=0)
    return out


# -- space-time container ------------------------------------------------------

@dataclass
class SpaceTimeField:
    """Samples of one spatial field per time slice, all on one TorusGrid.

    ``data`` has the time axis first: (nt, *components, *space).
    """

    grid: TorusGrid
    times: np.ndarray
    data: np.ndarray
    kind: str = "scalar"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.data.shape[0] != self.times.size:
            raise ValueError("one spatial slice per time required")
        ncomp = {"scalar": 0, "vector": 1, "tensor": 2}[self.kind]
        if self.data.shape[1 + ncomp:] != self.grid.shape:
            raise ValueError(f"slices must match grid shape {self.grid.shape}")
        if self.kind == "tensor":
            N = self.grid.dim
            if self.data.shape[1:3] != (N, N):
                raise ValueError("tensor components must be (N, N)")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def __getitem__(self, k):
        return self.data[k]
