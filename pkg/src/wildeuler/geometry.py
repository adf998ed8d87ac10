"""The convex set S[e], its defining functional, and deterministic segment selection.

Points are pairs (w, H) with w in R^N and H traceless symmetric. Everything is
vectorised over leading axes: w has shape (..., N), H has shape (..., N, N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# tolerance below which a point is treated as lying on the boundary of S[e]
BOUNDARY_RTOL = 1e-12


class SelectionError(RuntimeError):
    """No admissible segment met the calibrated length bound within the search budget."""

    def __init__(self, message: str, best: "SegmentSelection"):
        super().__init__(message)
        self.best = best


# -- eigenvalues ---------------------------------------------------------------

def lambda_max_sym(A: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of symmetric 2x2 or 3x3 matrices (closed form, vectorised)."""
    A = np.asarray(A, dtype=float)
    N = A.shape[-1]
    if N == 2:
        a, b, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
        return 0.5 * (a + d) + np.hypot(0.5 * (a - d), b)
    if N == 3:
        return _lambda_max_3(A)
    if N == 1:
        return A[..., 0, 0]
    raise ValueError("closed form only for N in {1, 2, 3}")


def _lambda_max_3(A: np.ndarray) -> np.ndarray:
    # trigonometric form of Cardano's solution for a symmetric matrix
    q = (A[..., 0, 0] + A[..., 1, 1] + A[..., 2, 2]) / 3.0
    p1 = A[..., 0, 1] ** 2 + A[..., 0, 2] ** 2 + A[..., 1, 2] ** 2
    d0, d1, d2 = A[..., 0, 0] - q, A[..., 1, 1] - q, A[..., 2, 2] - q
    p2 = d0 ** 2 + d1 ** 2 + d2 ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b00, b11, b22 = d0 / safe, d1 / safe, d2 / safe
    b01, b02, b12 = A[..., 0, 1] / safe, A[..., 0, 2] / safe, A[..., 1, 2] / safe
    det = (b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
           + b02 * (b01 * b12 - b11 * b02))
    r = np.clip(0.5 * det, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    return np.where(p > 0, q + 2.0 * p * np.cos(phi), q)


# -- the set S[e] --------------------------------------------------------------

def outer(w: np.ndarray) -> np.ndarray:
    return w[..., :, None] * w[..., None, :]


def s_value(w: np.ndarray, H: np.ndarray) -> np.ndarray:
    """(N/2) lambda_max[w (x) w - H]."""
    w = np.asarray(w, dtype=float)
    N = w.shape[-1]
    return 0.5 * N * lambda_max_sym(outer(w) - np.asarray(H, dtype=float))


def boundary_point(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """[a, a (x) a - |a|^2/N I], which lies on the boundary of S[|a|^2/2]."""
    a = np.asarray(a, dtype=float)
    N = a.size
    return a.copy(), outer(a) - (a @ a / N) * np.eye(N)


def op_norm_sym(H: np.ndarray) -> np.ndarray:
    """Spectral norm of symmetric matrices."""
    return np.maximum(lambda_max_sym(H), lambda_max_sym(-np.asarray(H)))


@dataclass(frozen=True)
class GeomPoint:
    w: np.ndarray
    H: np.ndarray
    e: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        H = np.asarray(self.H, dtype=float)
        if H.shape != (w.size, w.size):
            raise ValueError("H must be N x N")
        if not np.array_equal(H, H.T):
            raise ValueError("H must be exactly symmetric")
        if abs(np.trace(H)) > 1e-12 * max(1.0, np.abs(H).max()):
            raise ValueError("H must be traceless")
        if self.e <= 0:
            raise ValueError("energy level e must be positive")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "H", H)

    @property
    def N(self) -> int:
        return self.w.size

    def s_value(self) -> float:
        return float(s_value(self.w, self.H))

    def deficiency(self) -> float:
        return self.e - self.s_value()

    def in_S(self) -> bool:
        return self.s_value() < self.e

    def energy_gap(self) -> float:
        return self.e - 0.5 * float(self.w @ self.w)


def in_S(p: GeomPoint) -> bool:
    return p.in_S()


def deficiency(p: GeomPoint) -> float:
    return p.deficiency()


# -- segment selection -------------------------------------------------------------

@dataclass(frozen=True)
class SelectionParams:
    """Knobs of the segment search.

    ``c_cal`` is the calibrated length constant (0 disables the bound), ``chi0``
    scales the floor chi(d) = chi0 * min(d, 1) on |a +- b|.
    """

    design_size: int = 0          # 0 -> default per dimension
    c_cal: float = 0.0
    chi0: float = 0.1
    bisection_steps: int = 48
    max_refinements: int = 2

    def size_for(self, N: int) -> int:
        if self.design_size:
            return self.design_size
        return 72 if N == 2 else 64


@dataclass(frozen=True)
class SegmentSelection:
    a: np.ndarray
    b: np.ndarray
    L: float
    trivial: bool = False
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def s(self) -> np.ndarray:
        return self.a - self.b

    @property
    def M_mat(self) -> np.ndarray:
        return outer(self.a) - outer(self.b)


def chi_floor(d: float, chi0: float) -> float:
    return chi0 * min(max(d, 0.0), 1.0)


def _random_rotation(N: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((N, N)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def sphere_design(N: int, size: int, seed: int = 0) -> np.ndarray:
    """Unit vectors: equispaced circle (N=2) or Fibonacci sphere (N=3), rotated by seed."""
    if N == 2:
        offset = 0.0 if seed == 0 else np.random.default_rng(seed).uniform(0, 2 * np.pi / size)
        th = offset + 2 * np.pi * np.arange(size) / size
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if N == 3:
        i = np.arange(size) + 0.5
        z = 1 - 2 * i / size
        rho = np.sqrt(1 - z ** 2)
        th = np.pi * (1 + 5 ** 0.5) * i
        pts = np.stack([rho * np.cos(th), rho * np.sin(th), z], axis=-1)
        return pts if seed == 0 else pts @ _random_rotation(3, seed).T
    raise ValueError("N must be 2 or 3")


def _pair_indices(size: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(size, k=1)
    return i, j


def max_half_length(w, H, s, M, level, steps=48):
    """Largest L with s_value(w + lam s, H + lam M) <= level for all |lam| <= L.

    Vectorised over the leading axes of s, M (and w, H, level by broadcasting).
    The functional is convex along the segment, so one bisection per side suffices.
    """
    w = np.asarray(w, dtype=float)
    H = np.asarray(H, dtype=float)
    snorm = np.linalg.norm(s, axis=-1)
    level = np.asarray(level, dtype=float)
    # beyond this the point leaves the ball |w| <= sqrt(2 level)
    hi0 = (np.linalg.norm(w, axis=-1) + np.sqrt(2 * np.maximum(level, 0.0))) / np.where(snorm > 0, snorm, 1.0) + 1e-12
    hi0 = np.where(snorm > 0, hi0, 0.0)
    out = []
    for sign in (1.0, -1.0):
        lo = np.zeros_like(hi0)
        hi = hi0.copy()
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            lam = sign * mid
            val = s_value(w + lam[..., None] * s, H + lam[..., None, None] * M)
            ok = val <= level
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out.append(lo)
    return np.minimum(out[0], out[1])


def select_segment(p: GeomPoint, tiebreak_seed: int = 0,
                   params: SelectionParams = SelectionParams()) -> SegmentSelection:
    """Deterministic stand-in for a measurable selection of the set-valued map.

    Outside the closure of S[e] (and on its boundary) the trivial pair [w, w] is
    returned. Otherwise candidate pairs from a seed-rotated sphere design are scored
    by L|s|, where L is the largest half-length keeping the deficiency at least half
    of the deficiency of p; the best admissible pair wins, ties going to the lowest
    design index.
    """
    d = p.deficiency()
    if d <= BOUNDARY_RTOL * p.e:
        return SegmentSelection(a=p.w.copy(), b=p.w.copy(), L=0.0, trivial=True, seed=tiebreak_seed)
    N = p.N
    radius = math.sqrt(2 * p.e)
    level = p.e - 0.5 * d
    floor = chi_floor(d, params.chi0)
    gap = p.energy_gap()
    target = params.c_cal * gap / math.sqrt(p.e)
    size = params.size_for(N)
    best = None
    for attempt in range(params.max_refinements + 1):
        dirs = radius * sphere_design(N, size, tiebreak_seed)
        i, j = _pair_indices(size)
        a, b = dirs[i], dirs[j]
        plus = np.linalg.norm(a + b, axis=-1)
        minus = np.linalg.norm(a - b, axis=-1)
        keep = (plus >= floor) & (minus >= floor) & (minus > 0)
        a, b = a[keep], b[keep]
        s = a - b
        M = outer(a) - outer(b)
        L = max_half_length(p.w, p.H, s, M, level, params.bisection_steps)
        score = L * np.linalg.norm(s, axis=-1)
        top = score.max()
        k = int(np.flatnonzero(score >= top * (1 - 1e-12))[0])
        cand = SegmentSelection(a=a[k], b=b[k], L=float(L[k]), seed=tiebreak_seed,
                                meta={"score": float(top), "target": float(target),
                                      "design_size": size, "candidates": int(keep.sum())})
        if best is None or cand.meta["score"] > best.meta["score"]:
            best = cand
        if top >= target:
            return best
        size *= 2
    raise SelectionError(f"best L|s| = {best.meta['score']:.4g} below calibrated bound {target:.4g}", best)


# -- verification --------------------------------------------------------------------

@dataclass
class SegmentReport:
    on_sphere: bool
    inside: bool
    long_enough: bool
    separated: bool
    sphere_error: float
    min_margin_ratio: float     # min over lambda grid of deficiency / deficiency(p)
    length_ratio: float         # L|s| sqrt(e) / (e - |w|^2/2)
    pm_norms: tuple[float, float]

    @property
    def ok(self) -> bool:
        return self.on_sphere and self.inside and self.long_enough and self.separated

    def as_dict(self) -> dict:
        return {k: (v if not isinstance(v, np.generic) else v.item()) for k, v in self.__dict__.items()} | {"ok": self.ok}


def verify_segment(sel: SegmentSelection, p: GeomPoint, params: SelectionParams = SelectionParams(),
                   n_lambda: int = 2001, L_override: float | None = None) -> SegmentReport:
    """Check the selection conditions on a dense lambda grid and report margins."""
    e = p.e
    d = p.deficiency()
    sphere_err = max(abs(0.5 * sel.a @ sel.a - e), abs(0.5 * sel.b @ sel.b - e))
    on_sphere = sphere_err <= 1e-12 * max(1.0, e)
    L = sel.L if L_override is None else L_override
    lam = np.linspace(-L, L, n_lambda)
    pts_w = p.w + lam[:, None] * sel.s
    pts_H = p.H + lam[:, None, None] * sel.M_mat
    defs = e - s_value(pts_w, pts_H)
    if d > 0:
        ratio = float(defs.min() / d)
        inside = bool(np.all(defs > 0) and ratio >= 0.5 - 1e-9)
    else:
        ratio = float("nan")
        inside = bool(L == 0)
    gap = p.energy_gap()
    length = L * float(np.linalg.norm(sel.s))
    length_ratio = length * math.sqrt(e) / gap if gap > 0 else float("inf")
    long_enough = length >= params.c_cal * gap / math.sqrt(e) and (gap <= 0 or length > 0)
    plus, minus = float(np.linalg.norm(sel.a + sel.b)), float(np.linalg.norm(sel.a - sel.b))
    separated = min(plus, minus) >= chi_floor(d, params.chi0) and (d <= 0 or min(plus, minus) > 0)
    return SegmentReport(on_sphere=bool(on_sphere), inside=inside, long_enough=bool(long_enough), separated=bool(separated), sphere_error=float(sphere_err),
                         min_margin_ratio=ratio, length_ratio=float(length_ratio), pm_norms=(plus, minus))


# -- sampling helpers (tests, calibration) --------------------------------------------

def random_traceless_symmetric(rng: np.random.Generator, N: int, scale: float = 1.0, size=None) -> np.ndarray:
    shape = (() if size is None else (size,)) + (N, N)
    A = rng.standard_normal(shape) * scale
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    tr = np.trace(A, axis1=-2, axis2=-1)[..., None, None]
    A = A - tr / N * np.eye(N)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def exact_traceless(H: np.ndarray) -> np.ndarray:
    """Remove the rounding residue of the trace by adjusting the last diagonal entry."""
    H = np.array(H, dtype=float, copy=True)
    N = H.shape[-1]
    H[..., N - 1, N - 1] = -np.trace(H[..., : N - 1, : N - 1], axis1=-2, axis2=-1)
    return H


def sample_interior_points(rng: np.random.Generator, N: int, e: float, count: int,
                           min_deficiency: float = 0.0) -> list[GeomPoint]:
    """Rejection-sample points of S[e] with deficiency >= min_deficiency * e."""
    out: list[GeomPoint] = []
    r = math.sqrt(2 * e)
    while len(out) < count:
        w = rng.uniform(-r, r, size=(4 * count, N))
        H = exact_traceless(random_traceless_symmetric(rng, N, scale=e, size=4 * count))
        defs = e - s_value(w, H)
        good = np.flatnonzero(defs >= max(min_deficiency * e, 1e-9))
        for k in good[: count - len(out)]:
            out.append(GeomPoint(w[k], H[k], e))
    return out
