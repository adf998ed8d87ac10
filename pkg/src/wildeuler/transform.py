"""From the noisy compressible system to the abstract Euler frame (h, r, M).

Additive noise:       rho u - rho beta G = v + V + grad Psi,  r = rho,  h = rho beta G + V + grad Psi
Multiplicative noise: exp(-beta) rho u = v + V + grad Psi,  r = rho exp(-beta),  h = V + grad Psi

The path beta is always the stopped path. Fields live on a time grid that is a
stride of the path grid; ODEs in time are stepped on the full path grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .stochastics import StoppedPath
from .torus import (TorusGrid, derivative, divergence, gradient, helmholtz_project, integrate,
                    laplacian, solve_elliptic_m, vector_gradient)


class FrameError(RuntimeError):
    """Density lost positivity or a frame bound failed."""


# -- data types --------------------------------------------------------------

@dataclass(frozen=True)
class PressureLaw:
    kappa: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.kappa <= 0 or self.gamma < 1:
            raise ValueError("need kappa > 0 and gamma >= 1")

    def __call__(self, rho):
        return self.kappa * np.power(rho, self.gamma)


def c3_surrogate(grid: TorusGrid, f: np.ndarray) -> float:
    """Sum over derivative orders 0..3 of the max spectral derivative, all axis multi-indices."""
    N = grid.dim
    f_hat = grid.fft(f)
    total = 0.0
    for order in range(4):
        best = 0.0
        for idx in np.ndindex(*([N] * order)) if order else [()]:
            sym = 1.0
            for ax in idx:
                sym = sym * (1j * grid.wavenumbers[ax])
            best = max(best, float(np.abs(grid.ifft(sym * f_hat)).max()))
        total += best
    return total


def spectral_tail(grid: TorusGrid, f: np.ndarray) -> float:
    """Fraction of spectral energy in the top half of the resolved band."""
    f_hat = np.abs(grid.fft(f)) ** 2
    kmax = np.sqrt(grid.k2) / (2 * np.pi)
    total = f_hat.sum()
    return float(f_hat[kmax > grid.res / 4].sum() / total) if total > 0 else 0.0


@dataclass
class InitialData:
    grid: TorusGrid
    rho0: np.ndarray              # (*space)
    mom0: np.ndarray              # (N, *space)
    D: float = 1000.0

    def bound(self) -> float:
        N = self.grid.dim
        return (c3_surrogate(self.grid, self.rho0)
                + max(c3_surrogate(self.grid, self.mom0[i]) for i in range(N))
                + float(np.max(1.0 / self.rho0)))

    def check(self, tail_tol: float = 1e-10) -> dict:
        if np.any(self.rho0 <= 0):
            raise ValueError("initial density must be positive")
        b = self.bound()
        tails = [spectral_tail(self.grid, self.rho0)] + [spectral_tail(self.grid, c) for c in self.mom0]
        return {"bound": b, "D": self.D, "within_D": b <= self.D, "spectral_tail": max(tails),
                "resolved": max(tails) <= tail_tol}


def smooth_initial_data(grid: TorusGrid, rho_amp: float = 0.2, sol_amp: float = 0.1,
                        grad_amp: float = 0.002, mean=None, D: float = 1000.0) -> InitialData:
    """Band-limited preset: rho0 = 1 + rho_amp*prod sin, momentum = solenoidal + gradient + mean."""
    x, tp = grid.coords, 2 * np.pi
    N = grid.dim
    rho0 = 1.0 + rho_amp * np.prod([np.sin(tp * xi) for xi in x], axis=0)
    sol = np.zeros((N,) + grid.shape)
    sol[0] = sol_amp * tp * np.sin(tp * x[0]) * np.cos(tp * x[1])
    sol[1] = -sol_amp * tp * np.cos(tp * x[0]) * np.sin(tp * x[1])
    pot = grad_amp * np.cos(tp * x[0]) * np.cos(tp * x[-1])
    mom0 = sol + gradient(grid, pot)
    if mean is not None:
        mom0 = mom0 + np.asarray(mean, float).reshape((N,) + (1,) * N)
    return InitialData(grid, rho0, mom0, D)


def default_noise_field(grid: TorusGrid, amp: float = 0.05) -> np.ndarray:
    x, tp = grid.coords, 2 * np.pi
    N = grid.dim
    G = np.zeros((N,) + grid.shape)
    for i in range(N):
        G[i] = amp * np.sin(tp * x[(i + 1) % N]) + 0.5 * amp * np.cos(tp * x[i])
    return G


def w1inf_norm(grid: TorusGrid, G: np.ndarray) -> float:
    return float(np.abs(G).max() + np.abs(vector_gradient(grid, G)).max())


@dataclass
class NoiseSpec:
    kind: str                       # "additive" | "multiplicative"
    path: StoppedPath
    G: np.ndarray | None = None     # (N, *space), additive only
    G_norm: float = 0.0

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "additive" and self.G is None:
            raise ValueError("additive noise needs G")


def field_indices(path: StoppedPath, stride: int) -> np.ndarray:
    K = path.values.size - 1
    if stride < 1 or K % stride:
        raise ValueError(f"stride {stride} must divide the path length {K}")
    return np.arange(0, K + 1, stride)


# -- initial split and potential ------------------------------------------------

def split_initial(grid: TorusGrid, mom0: np.ndarray):
    """(v0, V0, Psi0) with mom0 = v0 + V0 + grad Psi0."""
    sp = helmholtz_project(grid, mom0)
    return sp.solenoidal, sp.mean, sp.potential


def choose_psi(Psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Time-constant extension, shape (nt+1, *space)."""
    return np.broadcast_to(Psi0, (np.asarray(times).size,) + Psi0.shape).copy()


def psi_positivity_margin(grid: TorusGrid, rho0: np.ndarray, Psi0: np.ndarray, T: float) -> float:
    """min over x of rho0 - T*max(Lap Psi0, 0): a lower bound on rho in the noise-free solve."""
    lap = laplacian(grid, Psi0)
    return float(np.min(rho0 - T * np.maximum(lap, 0.0)))


def scale_gradient_part(grid: TorusGrid, data: InitialData, T: float, rho_min: float) -> tuple[InitialData, float]:
    """Shrink the gradient component of mom0 until the noise-free density stays >= rho_min."""
    v0, V0, Psi0 = split_initial(grid, data.mom0)
    lap_max = float(np.max(np.maximum(laplacian(grid, Psi0), 0.0)))
    room = float(np.min(data.rho0)) - rho_min
    if room <= 0:
        raise FrameError("rho0 already violates rho_min")
    factor = 1.0 if T * lap_max <= 0.5 * room else 0.5 * room / (T * lap_max)
    if factor == 1.0:
        return data, 1.0
    mom = data.mom0 - (1 - factor) * gradient(grid, Psi0)
    return InitialData(grid, data.rho0, mom, data.D), factor


# -- continuity equations -------------------------------------------------------

@dataclass
class ContinuitySolution:
    rho: np.ndarray                 # (nt+1, *space) on the field grid
    times: np.ndarray
    probes: np.ndarray | None       # (K+1, P) integrals of rho against probe functions on the path grid
    mass: np.ndarray                # (nt+1,)
    method: str


def solve_continuity_additive(grid: TorusGrid, rho0: np.ndarray, Psi0: np.ndarray, G: np.ndarray,
                              path: StoppedPath, stride: int = 1, method: str = "spectral",
                              probes: np.ndarray | None = None, rho_min: float = 0.0) -> ContinuitySolution:
    """d_t rho + Lap Psi + beta div(rho G) = 0 stepped with RK4 on the path grid.

    ``spectral`` integrates the flux form with spectral divergence (mass exact);
    ``characteristics`` traces x' = beta G(x) forward from the nodes with RK4, carries
    d rho/dt = -Lap Psi - beta rho div G, and resamples with periodic cubic interpolation.
    ``probes`` (P, *space) records integral(rho * probe) at every path step.
    """
    dt = path.base.dt
    b = np.asarray(path.values, float)
    K = b.size - 1
    idx = field_indices(path, stride)
    lap = laplacian(grid, Psi0)
    rho = np.array(rho0, dtype=float)
    out = [rho.copy()]
    rec = [] if probes is None else [integrate(grid, probes * rho)]

    if method == "spectral":
        def rhs(r, beta):
            return -lap - beta * divergence(grid, r * G)

        step = lambda r, k: _rk4(rhs, r, dt, b[k], 0.5 * (b[k] + b[k + 1]), b[k + 1])
    elif method == "characteristics":
        divG = divergence(grid, G)
        step = lambda r, k: _characteristic_step(grid, r, G, divG, lap, dt, b[k], b[k + 1])
    else:
        raise ValueError(f"unknown method {method!r}")

    for k in range(K):
        rho = step(rho, k)
        if not np.all(np.isfinite(rho)) or rho.min() <= rho_min:
            raise FrameError(f"density fell to {rho.min():.4g} at t={(k + 1) * dt:.4g}; "
                             "reduce the Psi/G amplitude or the horizon")
        if (k + 1) % stride == 0:
            out.append(rho.copy())
        if probes is not None:
            rec.append(integrate(grid, probes * rho))
    rho_f = np.stack(out)
    return ContinuitySolution(rho_f, path.times[idx], None if probes is None else np.stack(rec),
                              integrate(grid, rho_f), method)


def _rk4(rhs, y, dt, b0, bh, b1):
    k1 = rhs(y, b0)
    k2 = rhs(y + 0.5 * dt * k1, bh)
    k3 = rhs(y + 0.5 * dt * k2, bh)
    k4 = rhs(y + dt * k3, b1)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _periodic_interp(grid: TorusGrid, f: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Cubic periodic interpolation of f at points pts (N, *shape) in [0,1)-units."""
    coords = np.mod(pts, 1.0) * grid.res
    return map_coordinates(f, coords, order=3, mode="grid-wrap")


def _characteristic_step(grid, rho, G, divG, lap, dt, b0, b1):
    N = grid.dim
    X0 = np.stack(grid.coords)
    bh = 0.5 * (b0 + b1)

    def vel(X, beta):
        return beta * np.stack([_periodic_interp(grid, G[i], X) for i in range(N)])

    def src(X, r, beta):
        return -_periodic_interp(grid, lap, X) - beta * r * _periodic_interp(grid, divG, X)

    # coupled RK4 for (X, rho along X)
    k1x, k1r = vel(X0, b0), src(X0, rho, b0)
    X, r = X0 + 0.5 * dt * k1x, rho + 0.5 * dt * k1r
    k2x, k2r = vel(X, bh), src(X, r, bh)
    X, r = X0 + 0.5 * dt * k2x, rho + 0.5 * dt * k2r
    k3x, k3r = vel(X, bh), src(X, r, bh)
    X, r = X0 + dt * k3x, rho + dt * k3r
    k4x, k4r = vel(X, b1), src(X, r, b1)
    disp = dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    carried = rho + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
    # the label x landing on node y solves x + disp(x) = y
    lab = X0.copy()
    for _ in range(4):
        d = np.stack([_periodic_interp(grid, disp[i], lab) for i in range(N)])
        lab = X0 - d
    return _periodic_interp(grid, carried, lab)


def exp_integral(path: StoppedPath) -> np.ndarray:
    """int_0^t exp(beta) ds on the path grid (trapezoid)."""
    e = np.exp(np.asarray(path.values, float))
    out = np.zeros_like(e)
    out[1:] = np.cumsum(0.5 * path.base.dt * (e[1:] + e[:-1]))
    return out


def solve_continuity_multiplicative(grid: TorusGrid, rho0: np.ndarray, Psi0: np.ndarray, path: StoppedPath,
                                    stride: int = 1, probes: np.ndarray | None = None,
                                    rho_min: float = 0.0) -> ContinuitySolution:
    """rho(t) = rho0 - (int_0^t exp(beta) ds) Lap Psi0."""
    idx = field_indices(path, stride)
    E = exp_integral(path)
    lap = laplacian(grid, Psi0)
    rho = rho0[None] - E[idx].reshape((-1,) + (1,) * grid.dim) * lap[None]
    if rho.min() <= rho_min:
        raise FrameError(f"density fell to {rho.min():.4g}; reduce the Psi amplitude or the horizon")
    rec = None
    if probes is not None:
        a0 = integrate(grid, probes * rho0)
        a1 = integrate(grid, probes * lap)
        rec = a0[None] - E[:, None] * a1[None]
    return ContinuitySolution(rho, path.times[idx], rec, integrate(grid, rho), "closed-form")


# -- mean momentum ---------------------------------------------------------------

def V_integrand(grid: TorusGrid, rho: np.ndarray, Psi0: np.ndarray, G: np.ndarray, beta: float) -> np.ndarray:
    """mean over the torus of rho beta^2 (G.grad)G + beta (grad Psi.grad)G."""
    DG = vector_gradient(grid, G)                  # DG[i, j] = d_j G_i
    gP = gradient(grid, Psi0)
    flux = rho * beta ** 2 * G + beta * gP         # (N, *space)
    val = np.einsum("ij...,j...->i...", DG, flux)
    return integrate(grid, val)


def solve_V_additive(grid: TorusGrid, rho: np.ndarray, times: np.ndarray, Psi0: np.ndarray, G: np.ndarray,
                     beta: np.ndarray, V0: np.ndarray) -> np.ndarray:
    """dV/dt = -integrand(t); trapezoid (RK4 with linear-in-time data) on the field grid."""
    J = np.stack([V_integrand(grid, rho[k], Psi0, G, beta[k]) for k in range(times.size)])
    return integrate_rate(J, times, V0)


def integrate_rate(J: np.ndarray, times: np.ndarray, V0: np.ndarray) -> np.ndarray:
    V = np.zeros((times.size,) + np.shape(V0))
    V[0] = V0
    dt = np.diff(times)
    V[1:] = V0 - np.cumsum(0.5 * dt[:, None] * (J[1:] + J[:-1]), axis=0)
    return V


def solve_V_multiplicative(V0: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.asarray(V0, float)[None] * np.exp(-0.5 * np.asarray(times))[:, None]


# -- frame -----------------------------------------------------------------------

def holder_time_norm(values: np.ndarray, times: np.ndarray, a: float) -> float:
    """sup_t |f(t)| + sup_{s != t} |f(t) - f(s)| / |t - s|^a, f valued in sup-norm over space/components."""
    nt = values.shape[0]
    flat = values.reshape(nt, -1)
    sup = float(np.abs(flat).max())
    q = 0.0
    for k in range(1, nt):
        diff = np.abs(flat[k:] - flat[:-k]).max(axis=1)
        q = max(q, float(diff.max() / (k * (times[1] - times[0])) ** a))
    return sup + q


def c1_time_holder(grid: TorusGrid, f: np.ndarray, times: np.ndarray, a: float) -> float:
    """Discrete C^a([0,T]; C^1) norm: value plus spatial gradient in the time-Hölder norm."""
    N = grid.dim
    grads = np.stack([derivative(grid, f, ax) for ax in range(N)], axis=1)
    return holder_time_norm(f, times, a) + holder_time_norm(grads, times, a)


@dataclass
class AbstractEulerFrame:
    kind: str
    grid: TorusGrid
    times: np.ndarray
    h: np.ndarray          # (nt+1, N, *space)
    r: np.ndarray          # (nt+1, *space)
    M: np.ndarray          # (nt+1, N, N, *space); v-independent part for multiplicative noise
    v0: np.ndarray         # (N, *space)
    V: np.ndarray          # (nt+1, N)
    Psi0: np.ndarray
    rho: np.ndarray
    beta: np.ndarray       # stopped path on the field grid
    bounds: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    G: np.ndarray | None = None
    probes: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.grid.dim

    @property
    def nt(self) -> int:
        return self.times.size - 1

    def M_of(self, v: np.ndarray | None) -> np.ndarray:
        """Corrector tensor for velocity v; v-dependent only for multiplicative noise."""
        if self.kind == "additive" or v is None:
            return self.M
        return self.M + corrector_of_v(self.grid, v)


def corrector_of_v(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    """Corrector from the (1/2) v term of the multiplicative right-hand side, per time slice."""
    out = np.empty(v.shape[:1] + (grid.dim,) + v.shape[1:])
    for k in range(v.shape[0]):
        rhs = 0.5 * v[k]
        rhs = rhs - integrate(grid, rhs).reshape((-1,) + (1,) * grid.dim)
        out[k] = solve_elliptic_m(grid, rhs)[1]
    return out


def additive_rhs(grid: TorusGrid, rho: np.ndarray, Psi0: np.ndarray, G: np.ndarray, beta: float,
                 pressure: PressureLaw) -> tuple[np.ndarray, float]:
    """Right-hand side of the corrector system for one slice; returns (rhs, mean before correction)."""
    N = grid.dim
    term = beta * divergence(grid, rho * beta * G + gradient(grid, Psi0))[None] * G
    rhs = gradient(grid, pressure(rho)) - term
    correction = integrate(grid, term)
    rhs = rhs + correction.reshape((N,) + (1,) * N)
    mean = float(np.abs(integrate(grid, rhs)).max())
    return rhs - integrate(grid, rhs).reshape((N,) + (1,) * N), mean


def multiplicative_rhs(grid: TorusGrid, rho: np.ndarray, Psi0: np.ndarray, beta: float,
                       pressure: PressureLaw) -> tuple[np.ndarray, float]:
    """v-independent part: exp(-beta) grad p + (1/2) grad Psi."""
    N = grid.dim
    rhs = math.exp(-beta) * gradient(grid, pressure(rho)) + 0.5 * gradient(grid, Psi0)
    mean = float(np.abs(integrate(grid, rhs)).max())
    return rhs - integrate(grid, rhs).reshape((N,) + (1,) * N), mean


@dataclass(frozen=True)
class FrameConfig:
    stride: int = 16
    rho_min: float = 0.2
    method: str = "spectral"
    pressure: PressureLaw = PressureLaw()


def _bounds(grid, times, h, r, M, v0, a) -> dict:
    N = grid.dim
    return {"h": c1_time_holder(grid, h, times, a), "r": c1_time_holder(grid, r, times, a),
            "M": c1_time_holder(grid, M, times, a), "r_min": float(r.min()), "r_max": float(r.max()),
            "v0_C1": float(np.abs(v0).max() + np.abs(vector_gradient(grid, v0)).max()),
            "inv_r_max": float(1.0 / r.min())}


def assemble_frame_additive(data: InitialData, noise: NoiseSpec, cfg: FrameConfig = FrameConfig(),
                            probes: np.ndarray | None = None) -> AbstractEulerFrame:
    grid = data.grid
    N = grid.dim
    path = noise.path
    idx = field_indices(path, cfg.stride)
    times = path.times[idx]
    beta = np.asarray(path.values)[idx]
    v0, V0, Psi0 = split_initial(grid, data.mom0)
    cont = solve_continuity_additive(grid, data.rho0, Psi0, noise.G, path, cfg.stride, cfg.method,
                                     probes, cfg.rho_min)
    rho = cont.rho
    V = solve_V_additive(grid, rho, times, Psi0, noise.G, beta, V0)
    gP = gradient(grid, Psi0)
    h = rho[:, None] * beta.reshape((-1,) + (1,) * (N + 1)) * noise.G[None] + V.reshape(V.shape + (1,) * N) + gP[None]
    M = np.empty((times.size, N, N) + grid.shape)
    means = []
    for k in range(times.size):
        rhs, mean = additive_rhs(grid, rho[k], Psi0, noise.G, beta[k], cfg.pressure)
        means.append(mean)
        M[k] = solve_elliptic_m(grid, rhs)[1]
    bounds = _bounds(grid, times, h, rho, M, v0, path.a)
    bounds["c_M"] = max(bounds["h"], bounds["r"], bounds["M"], bounds["v0_C1"], bounds["inv_r_max"])
    meta = {"noise": "additive", "seed": path.base.seed, "M_level": path.M, "a": path.a,
            "tau_index": path.tau_index, "pressure": {"kappa": cfg.pressure.kappa, "gamma": cfg.pressure.gamma},
            "rhs_mean_max": max(means), "mass_drift": float(np.abs(cont.mass - cont.mass[0]).max()),
            "stride": cfg.stride, "G_W1inf": w1inf_norm(grid, noise.G)}
    return AbstractEulerFrame("additive", grid, times, h, rho, M, v0, V, Psi0, rho, beta, bounds, meta,
                              G=noise.G, probes=cont.probes)


def assemble_frame_multiplicative(data: InitialData, noise: NoiseSpec, cfg: FrameConfig = FrameConfig(),
                                  probes: np.ndarray | None = None) -> AbstractEulerFrame:
    grid = data.grid
    N = grid.dim
    path = noise.path
    idx = field_indices(path, cfg.stride)
    times = path.times[idx]
    beta = np.asarray(path.values)[idx]
    v0, V0, Psi0 = split_initial(grid, data.mom0)
    cont = solve_continuity_multiplicative(grid, data.rho0, Psi0, path, cfg.stride, probes, cfg.rho_min)
    rho = cont.rho
    V = solve_V_multiplicative(V0, times)
    h = V.reshape(V.shape + (1,) * N) + gradient(grid, Psi0)[None]
    r = rho * np.exp(-beta).reshape((-1,) + (1,) * N)
    M = np.empty((times.size, N, N) + grid.shape)
    means = []
    for k in range(times.size):
        rhs, mean = multiplicative_rhs(grid, rho[k], Psi0, beta[k], cfg.pressure)
        means.append(mean)
        M[k] = solve_elliptic_m(grid, rhs)[1]
    bounds = _bounds(grid, times, h, r, M, v0, path.a)
    bounds["c_M"] = max(bounds["h"], bounds["r"], bounds["M"], bounds["v0_C1"], bounds["inv_r_max"])
    meta = {"noise": "multiplicative", "seed": path.base.seed, "M_level": path.M, "a": path.a,
            "tau_index": path.tau_index, "pressure": {"kappa": cfg.pressure.kappa, "gamma": cfg.pressure.gamma},
            "rhs_mean_max": max(means), "mass_drift": float(np.abs(cont.mass - cont.mass[0]).max()),
            "stride": cfg.stride}
    return AbstractEulerFrame("multiplicative", grid, times, h, r, M, v0, V, Psi0, rho, beta, bounds, meta,
                              probes=cont.probes)


def build_frame(data: InitialData, noise: NoiseSpec, cfg: FrameConfig = FrameConfig(),
                probes: np.ndarray | None = None) -> AbstractEulerFrame:
    if noise.kind == "additive":
        return assemble_frame_additive(data, noise, cfg, probes)
    return assemble_frame_multiplicative(data, noise, cfg, probes)


# -- test functions ----------------------------------------------------------------

def trig_family(grid: TorusGrid, count: int = 25) -> np.ndarray:
    """Real trigonometric functions cos/sin(2 pi k.x) ordered by |k|^2, the first ``count`` of them."""
    N = grid.dim
    ks = [np.array(k) - 3 for k in np.ndindex(*([7] * N))]
    canon = []
    for k in ks:
        nz = np.flatnonzero(k)
        if nz.size and k[nz[0]] < 0:
            continue
        canon.append(k)
    canon.sort(key=lambda k: (int(k @ k), tuple(k)))
    x = grid.coords
    out = []
    for k in canon:
        ph = 2 * np.pi * sum(ki * xi for ki, xi in zip(k, x))
        out.append(np.cos(ph))
        if np.any(k):
            out.append(np.sin(ph))
        if len(out) >= count:
            break
    return np.stack(out[:count])


def vector_tests(grid: TorusGrid, count: int = 25) -> np.ndarray:
    """Vector test functions g e_i for the scalar family, shape (count*N, N, *space)."""
    N = grid.dim
    fam = trig_family(grid, count)
    out = np.zeros((count * N, N) + grid.shape)
    for j in range(count):
        for i in range(N):
            out[j * N + i, i] = fam[j]
    return out


# -- Itô reconstruction ------------------------------------------------------------

@dataclass
class ItoReport:
    dts: list
    gaps: list
    ratios: list
    slope: float

    def as_dict(self) -> dict:
        return {"dts": self.dts, "gaps": self.gaps, "ratios": self.ratios, "slope": self.slope}


def ito_gap(grid: TorusGrid, rho_path: np.ndarray, beta: np.ndarray, dt: float, Psi0: np.ndarray,
            G: np.ndarray, phi: np.ndarray) -> float:
    """|Itô sum of (int rho G.phi) d beta - [(int rho G.phi) beta(T) - int beta int rho u . grad(G.phi)]|.

    ``rho_path`` holds the density at every path node. Only the gradient and noise parts
    of the momentum pair with grad(G.phi); the solenoidal and mean parts integrate to 0.
    """
    psi = np.sum(G * phi, axis=0)
    gpsi = gradient(grid, psi)
    gP = gradient(grid, Psi0)
    f = integrate(grid, rho_path * psi[None])
    # int rho u . grad psi with rho u = v + V + grad Psi + rho beta G
    fp = integrate(grid, np.sum(gP[None] * gpsi[None], axis=1)) \
        + beta * integrate(grid, rho_path * np.sum(G * gpsi, axis=0)[None])
    ito = float(np.sum(f[:-1] * np.diff(beta)))
    quad = float(np.sum(0.5 * dt * (beta[1:] * fp[1:] + beta[:-1] * fp[:-1])))
    transformed = f[-1] * beta[-1] - quad
    return abs(ito - transformed)


def ito_reconstruction_check(data: InitialData, G: np.ndarray, path: StoppedPath, phi: np.ndarray,
                             strides=(4, 2, 1)) -> ItoReport:
    """Gap between the two forms of the stochastic integral on coarsenings of one path."""
    grid = data.grid
    _, _, Psi0 = split_initial(grid, data.mom0)
    dts, gaps = [], []
    for s in strides:
        sub = _coarsen(path, s)
        cont = solve_continuity_additive(grid, data.rho0, Psi0, G, sub, stride=1)
        gaps.append(ito_gap(grid, cont.rho, np.asarray(sub.values), sub.base.dt, Psi0, G, phi))
        dts.append(sub.base.dt)
    ratios = [gaps[i] / gaps[i + 1] if gaps[i + 1] > 0 else math.inf for i in range(len(gaps) - 1)]
    slope = float(np.polyfit(np.log(dts), np.log(np.maximum(gaps, 1e-300)), 1)[0])
    return ItoReport(dts, gaps, ratios, slope)


def _coarsen(path: StoppedPath, s: int) -> StoppedPath:
    from .stochastics import WienerPath
    base = WienerPath(path.base.seed, path.base.T, path.base.dt * s, np.asarray(path.base.values)[::s])
    vals = np.asarray(path.values)[::s]
    return StoppedPath(base, path.a, path.M, path.tau_index // s, path.freeze_index // s, vals, path.norm)


# -- back transform -------------------------------------------------------------------

def back_transform(frame: AbstractEulerFrame, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(rho, rho u) on the field grid from the abstract velocity v (nt+1, N, *space)."""
    N = frame.N
    if frame.kind == "additive":
        return frame.rho, v + frame.h
    e = np.exp(frame.beta).reshape((-1,) + (1,) * (N + 1))
    return frame.rho, e * (v + frame.h)


@dataclass
class WeakResidualReport:
    continuity: float
    momentum: float
    initial: float
    mass_gap: float
    scale: float

    def ok(self, tol: float) -> bool:
        return max(self.continuity, self.momentum, self.initial) <= tol

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def weak_residuals(frame: AbstractEulerFrame, v: np.ndarray, pressure: PressureLaw = PressureLaw(),
                   count: int = 25, mom0: np.ndarray | None = None) -> WeakResidualReport:
    """Residuals of the original weak formulation at every field time, against trig test functions.

    Continuity: int rho(t) phi - int rho0 phi - int_0^t int rho u . grad phi.
    Momentum:   int rho u(t) . phi - int (rho u)_0 . phi - int_0^t int [rho u (x) u : grad phi + p div phi]
                - stochastic term (Itô sum on the field grid for additive noise; the exp(-beta)
                product rule for multiplicative noise).
    Residuals are divided by 1 + the largest term magnitude.
    """
    grid, N = frame.grid, frame.N
    times = frame.times
    rho, mom = back_transform(frame, v)
    scal = trig_family(grid, count)
    vec = vector_tests(grid, count)
    dt = times[1] - times[0]
    cum = lambda a: np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(0.5 * dt * (a[1:] + a[:-1]), axis=0)])

    grad_s = np.stack([gradient(grid, g) for g in scal])                        # (P, N, *space)
    A = integrate(grid, rho[:, None] * scal[None])                              # (nt+1, P)
    B = integrate(grid, np.einsum("tn...,pn...->tp...", mom, grad_s))
    res_c = A - A[0] - cum(B)
    mass = integrate(grid, rho)
    scale_c = 1.0 + max(np.abs(A).max(), np.abs(cum(B)).max())

    gradv = np.stack([vector_gradient(grid, g) for g in vec])                  # (Q, N, N, *space)
    divv = np.stack([divergence(grid, g) for g in vec])
    u = mom / rho[:, None]
    flux = np.einsum("ti...,tj...,qij...->tq...", mom, u, gradv)
    pres = integrate(grid, pressure(rho)[:, None] * divv[None])
    F = integrate(grid, flux) + pres
    Pm = integrate(grid, np.einsum("ti...,qi...->tq...", mom, vec))
    if frame.kind == "additive":
        S = integrate(grid, np.einsum("t...,i...,qi...->tq...", rho, frame.G, vec))
        ito = np.concatenate([np.zeros((1, S.shape[1])), np.cumsum(S[:-1] * np.diff(frame.beta)[:, None], axis=0)])
        res_m = Pm - Pm[0] - cum(F) - ito
        scale_m = 1.0 + max(np.abs(Pm).max(), np.abs(cum(F)).max(), np.abs(ito).max())
    else:
        # d[exp(-beta) P] = exp(-beta) (F - P/2) dt
        eb = np.exp(-frame.beta)[:, None]
        lhs = eb * Pm
        rate = eb * (F - 0.5 * Pm)
        res_m = lhs - lhs[0] - cum(rate)
        scale_m = 1.0 + max(np.abs(lhs).max(), np.abs(cum(rate)).max())
    init = 0.0
    if mom0 is not None:
        init = float(np.abs(mom[0] - mom0).max())
    return WeakResidualReport(float(np.abs(res_c).max() / scale_c), float(np.abs(res_m).max() / scale_m),
                              init, float(np.abs(mass - mass[0]).max()), float(max(scale_c, scale_m)))
