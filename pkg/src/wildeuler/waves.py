"""Localised plane-wave increments generated by a third-order operator symbol.

Space-time points are z = [t, x_1, ..., x_N]; index 0 is time. For a pair (a, b)
the cubic symbol A_ab(xi) is symmetric and traceless with zero (0,0) entry, so
applying it to any C^3 potential gives a block [[0, w], [w, V]] with
d_t w + div V = 0 and div w = 0. With the direction eta_ab,
A_ab(d)[psi(z . eta)] = psi'''(z . eta) [[0, a-b], [a-b, a(x)a - b(x)b]].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial


class DegeneratePairError(ValueError):
    """The pair (a, b) is antiparallel, so eta_ab is undefined."""


def _embed(v: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.asarray(v, dtype=float)])


def eta_direction(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.linalg.norm(a) * np.linalg.norm(b) + a @ b
    if c <= 1e-14 * max(1.0, a @ a):
        raise DegeneratePairError("eta is undefined for b = -lambda a, lambda > 0")
    e0 = np.zeros(a.size + 1)
    e0[0] = 1.0
    return -(_embed(a) + _embed(b) - c * e0) / c ** (2.0 / 3.0)


def r_matrix(a, b) -> np.ndarray:
    A0, B0 = _embed(a), _embed(b)
    return np.outer(A0, B0) - np.outer(B0, A0)


def symbol_A(a, b, xi) -> np.ndarray:
    """A_ab(xi) = 1/2 ((R xi) (x) (Q(xi) xi) + (Q(xi) xi) (x) (R xi))."""
    xi = np.asarray(xi, dtype=float)
    e0 = np.zeros(xi.size)
    e0[0] = 1.0
    Q = np.outer(xi, e0) - np.outer(e0, xi)
    u = r_matrix(a, b) @ xi
    v = Q @ xi
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def block_matrix(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    N = a.size
    out = np.zeros((N + 1, N + 1))
    out[0, 1:] = a - b
    out[1:, 0] = a - b
    out[1:, 1:] = np.outer(a, a) - np.outer(b, b)
    return out


def symbol_coefficients(a, b) -> np.ndarray:
    """C[i, j, k, l, m], symmetric in (k, l, m), with A_ab(xi)_ij = C_ijklm xi_k xi_l xi_m."""
    R = r_matrix(a, b)
    d = R.shape[0]
    eye = np.eye(d)
    # (Q(xi) xi)_j = xi_0 xi_j - delta_j0 |xi|^2 = P_jlm xi_l xi_m
    P = np.einsum("l,mj->jlm", eye[0], eye) - np.einsum("j,lm->jlm", eye[0], eye)
    P = 0.5 * (P + P.transpose(0, 2, 1))
    C = 0.5 * (np.einsum("ik,jlm->ijklm", R, P) + np.einsum("ilm,jk->ijklm", P, R))
    return sum(C.transpose(0, 1, *perm) for perm in itertools.permutations((2, 3, 4))) / 6.0


# -- cutoff ---------------------------------------------------------------------

@lru_cache(maxsize=None)
def smoothstep(order: int) -> tuple[Polynomial, ...]:
    """Polynomial S on [0,1] with S(0)=0, S(1)=1 and derivatives 1..order vanishing at both ends.

    Returns S and its first four derivatives.
    """
    q = order
    coeffs = np.zeros(2 * q + 2)
    for k in range(q + 1):
        coeffs[q + 1 + k] = math.comb(q + k, k) * math.comb(2 * q + 1, q - k) * (-1) ** k
    S = Polynomial(coeffs)
    return (S,) + tuple(S.deriv(m) for m in range(1, 5))


@dataclass(frozen=True)
class CutoffSpec:
    """Tensor-product plateau cutoff on a box.

    Along each axis the profile is 1 on the centred fraction ``plateau`` of the side
    (at least the half side) and tapers to 0 with a C^order polynomial smoothstep.
    """

    plateau: float = 0.5
    order: int = 4

    def __post_init__(self):
        if not 0.5 <= self.plateau < 1.0:
            raise ValueError("plateau fraction must lie in [1/2, 1)")
        if self.order < 3:
            raise ValueError("the cutoff must be at least C^3")


def profile_derivs(u: np.ndarray, cutoff: CutoffSpec, max_order: int = 4) -> np.ndarray:
    """Derivatives 0..max_order of the 1D profile in the unit variable u in [0, 1]."""
    polys = smoothstep(cutoff.order)
    tw = 0.5 * (1.0 - cutoff.plateau)
    u = np.asarray(u, dtype=float)
    out = np.zeros((max_order + 1,) + u.shape)
    left = (u > 0) & (u < tw)
    right = (u > 1 - tw) & (u < 1)
    mid = (u >= tw) & (u <= 1 - tw)
    out[0][mid] = 1.0
    ul = u[left] / tw
    ur = (1.0 - u[right]) / tw
    for k in range(max_order + 1):
        out[k][left] = polys[k](ul) / tw ** k
        out[k][right] = polys[k](ur) * (-1.0 / tw) ** k
    return out


def cutoff_derivs(z: np.ndarray, lo: np.ndarray, hi: np.ndarray, cutoff: CutoffSpec,
                  max_order: int = 3) -> list[np.ndarray]:
    """Derivative tensors D^0..D^max_order of the box cutoff at points z (P, d).

    D^k has shape (P,) + (d,) * k.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P, d = z.shape
    side = hi - lo
    prof = np.stack([profile_derivs((z[:, ax] - lo[ax]) / side[ax], cutoff, max_order)
                     / side[ax] ** np.arange(max_order + 1)[:, None] for ax in range(d)])
    # prof[ax, k, p]
    out = [np.prod(prof[:, 0, :], axis=0)]
    for k in range(1, max_order + 1):
        T = np.empty((P,) + (d,) * k)
        for idx in itertools.product(range(d), repeat=k):
            counts = np.bincount(idx, minlength=d)
            val = np.ones(P)
            for ax in range(d):
                val = val * prof[ax, counts[ax]]
            T[(slice(None),) + idx] = val
        out.append(T)
    return out


# -- wave increments -------------------------------------------------------------

@dataclass(frozen=True)
class WaveSpec:
    """One localised wave: potential phi(z) (L/n^3) cos(n (z - lo) . eta + phase) on a box."""

    a: np.ndarray
    b: np.ndarray
    n: float
    L: float
    lo: np.ndarray
    hi: np.ndarray
    cutoff: CutoffSpec = CutoffSpec()
    phase: float = 0.0
    eta: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.size != a.size + 1 or np.any(self.hi <= self.lo):
            raise ValueError("box must be a non-degenerate space-time rectangle")
        if abs(a @ a - b @ b) > 1e-10 * max(1.0, a @ a):
            raise ValueError("a and b must have equal length")
        if self.eta is None and not self.degenerate:
            object.__setattr__(self, "eta", eta_direction(a, b))

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def degenerate(self) -> bool:
        return bool(np.array_equal(self.a, self.b)) or self.L == 0.0


def phase_derivs(spec: WaveSpec, z: np.ndarray, max_order: int = 3) -> list[np.ndarray]:
    """c_k(z) with D^k[(L/n^3) cos(n (z - lo).eta + phase)] = c_k eta^{(x)k}."""
    arg = spec.n * ((z - spec.lo) @ spec.eta) + spec.phase
    pref = spec.L / spec.n ** 3
    return [pref * spec.n ** k * np.cos(arg + 0.5 * k * np.pi) for k in range(max_order + 1)]


def potential_value_and_derivs(spec: WaveSpec, z, max_order: int = 3) -> list[np.ndarray]:
    """Value and full derivative tensors of phi * (L/n^3) cos(n (z - lo).eta + phase).

    Returned list holds D^0..D^max_order, each of shape (P,) + (N+1,) * k; all are
    exactly zero outside the box.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P, d = z.shape
    if spec.degenerate:
        return [np.zeros((P,) + (d,) * k) for k in range(max_order + 1)]
    phi = cutoff_derivs(z, spec.lo, spec.hi, spec.cutoff, max_order)
    c = phase_derivs(spec, z, max_order)
    eta = spec.eta
    out = []
    for k in range(max_order + 1):
        T = np.zeros((P,) + (d,) * k)
        for idx in itertools.product(range(d), repeat=k):
            acc = np.zeros(P)
            # Leibniz over which of the k slots fall on the cutoff
            for mask in itertools.product((0, 1), repeat=k):
                on_phi = tuple(i for i, m in zip(idx, mask) if m)
                on_g = [i for i, m in zip(idx, mask) if not m]
                g_part = c[len(on_g)] * (np.prod(eta[on_g]) if on_g else 1.0)
                acc = acc + phi[len(on_phi)][(slice(None),) + on_phi] * g_part
            T[(slice(None),) + idx] = acc
        out.append(T)
    return out


@dataclass
class WaveFields:
    w: np.ndarray          # (P, N)
    V: np.ndarray          # (P, N, N)
    leading_w: np.ndarray  # (P, N)
    leading_V: np.ndarray  # (P, N, N)

    @property
    def remainder_sup(self) -> float:
        rw = np.abs(self.w - self.leading_w).max(initial=0.0)
        rV = np.abs(self.V - self.leading_V).max(initial=0.0)
        return float(max(rw, rV))


def _symmetric_part(T: np.ndarray) -> np.ndarray:
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def apply_A_points(spec: WaveSpec, z) -> WaveFields:
    """A_ab(d) applied analytically (Leibniz expansion) to the wave potential at points z."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P, d = z.shape
    N = d - 1
    if spec.degenerate:
        zw, zV = np.zeros((P, N)), np.zeros((P, N, N))
        return WaveFields(zw, zV, zw.copy(), zV.copy())
    inside = np.all((z > spec.lo) & (z < spec.hi), axis=1)
    full = np.zeros((P, d, d))
    lead = np.zeros((P, d, d))
    if inside.any():
        zi = z[inside]
        C = symbol_coefficients(spec.a, spec.b)
        eta = spec.eta
        phi = cutoff_derivs(zi, spec.lo, spec.hi, spec.cutoff, 3)
        c = phase_derivs(spec, zi, 3)
        A_eta = np.einsum("ijklm,k,l,m->ij", C, eta, eta, eta)
        C2 = np.einsum("ijklm,l,m->ijk", C, eta, eta)
        C1 = np.einsum("ijklm,m->ijkl", C, eta)
        lead_i = (phi[0] * c[3])[:, None, None] * A_eta
        rem = (3 * c[2][:, None, None] * np.einsum("ijk,pk->pij", C2, phi[1])
               + 3 * c[1][:, None, None] * np.einsum("ijkl,pkl->pij", C1, phi[2])
               + c[0][:, None, None] * np.einsum("ijklm,pklm->pij", C, phi[3]))
        full[inside] = _symmetric_part(lead_i + rem)
        lead[inside] = _symmetric_part(lead_i)
    return WaveFields(w=full[:, 0, 1:], V=full[:, 1:, 1:], leading_w=lead[:, 0, 1:], leading_V=lead[:, 1:, 1:])


def divergence_residual_points(spec: WaveSpec, z) -> np.ndarray:
    """Analytic (d_t w + div V, div w) at points, from fourth derivatives of the potential."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P, d = z.shape
    if spec.degenerate:
        return np.zeros((P, d))
    D4 = potential_value_and_derivs(spec, z, 4)[4]
    C = symbol_coefficients(spec.a, spec.b)
    # row divergence sum_j d_j A_ji over all space-time components j
    return np.einsum("jiklm,pjklm->pi", C, D4)


def apply_A(spec: WaveSpec, z) -> tuple[np.ndarray, np.ndarray, float]:
    """(w_n, V_n, R_n bound) at points; R_n bound is n * sup |full - leading term|."""
    f = apply_A_points(spec, z)
    return f.w, f.V, spec.n * f.remainder_sup


def unit_box(N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(N + 1), np.ones(N + 1)


def spacetime_points(axes: list[np.ndarray]) -> np.ndarray:
    """Cartesian product of 1D coordinate arrays, as (P, d) with 'ij' ordering."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def apply_symbol_to_derivs(a, b, D3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(w, V) from third-derivative tensors D3 of an arbitrary potential, shape (..., d, d, d)."""
    C = symbol_coefficients(a, b)
    full = _symmetric_part(np.einsum("ijklm,...klm->...ij", C, D3))
    return full[..., 0, 1:], full[..., 1:, 1:]
