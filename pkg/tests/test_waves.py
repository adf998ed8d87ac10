import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wildeuler.waves import (CutoffSpec, DegeneratePairError, WaveSpec, apply_A, apply_A_points,
                             apply_symbol_to_derivs, block_matrix, cutoff_derivs, divergence_residual_points,
                             eta_direction, potential_value_and_derivs, profile_derivs, smoothstep,
                             spacetime_points, symbol_A, symbol_coefficients, unit_box)


def _unit_pair(rng, N):
    a, b = rng.standard_normal((2, N))
    return a / np.linalg.norm(a), b / np.linalg.norm(b)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), N=st.sampled_from([2, 3]))
def test_symbol_is_symmetric_traceless_with_zero_corner(seed, N):
    rng = np.random.default_rng(seed)
    a, b = _unit_pair(rng, N)
    xi = rng.standard_normal(N + 1)
    A = symbol_A(a, b, xi)
    assert np.allclose(A, A.T, atol=1e-14)
    assert abs(np.trace(A)) < 1e-12 and abs(A[0, 0]) < 1e-12
    assert np.allclose(A @ xi, 0.0, atol=1e-12 * max(1, np.abs(xi).max() ** 4))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), N=st.sampled_from([2, 3]))
def test_symbol_at_eta_is_block(seed, N):
    rng = np.random.default_rng(seed)
    a, b = _unit_pair(rng, N)
    if np.linalg.norm(a + b) < 1e-3:
        return
    A = symbol_A(a, b, eta_direction(a, b))
    assert np.allclose(A, block_matrix(a, b), atol=1e-12)


def test_eta_undefined_for_antiparallel():
    with pytest.raises(DegeneratePairError):
        eta_direction([1.0, 0.0], [-2.0, 0.0])


def test_coefficient_tensor_reproduces_symbol():
    rng = np.random.default_rng(2)
    a, b = _unit_pair(rng, 3)
    C = symbol_coefficients(a, b)
    for perm in itertools.permutations((2, 3, 4)):
        assert np.array_equal(C, C.transpose(0, 1, *perm)) or np.allclose(C, C.transpose(0, 1, *perm), atol=1e-15)
    xi = rng.standard_normal(4)
    assert np.allclose(np.einsum("ijklm,k,l,m->ij", C, xi, xi, xi), symbol_A(a, b, xi), atol=1e-13)


@pytest.mark.parametrize("order", [3, 4, 6])
def test_smoothstep_endpoint_conditions(order):
    polys = smoothstep(order)
    assert abs(polys[0](0.0)) < 1e-14 and abs(polys[0](1.0) - 1.0) < 1e-12
    for k in range(1, min(order, 4) + 1):
        assert abs(polys[k](0.0)) < 1e-10 and abs(polys[k](1.0)) < 1e-9


def test_profile_is_plateau_and_compact():
    u = np.linspace(-0.2, 1.2, 1401)
    p = profile_derivs(u, CutoffSpec(), 0)[0]
    assert np.all(p[(u <= 0) | (u >= 1)] == 0.0)
    assert np.all(p[(u >= 0.25) & (u <= 0.75)] == 1.0)
    assert np.all((p >= 0) & (p <= 1))


def test_cutoff_derivatives_match_finite_differences():
    lo, hi = np.zeros(3), np.array([1.0, 2.0, 0.5])
    z = np.array([[0.2, 0.3, 0.1], [0.7, 1.6, 0.4]])
    D = cutoff_derivs(z, lo, hi, CutoffSpec(), 2)
    h = 1e-6
    for ax in range(3):
        dz = np.zeros(3)
        dz[ax] = h
        fd = (cutoff_derivs(z + dz, lo, hi, CutoffSpec(), 0)[0] - cutoff_derivs(z - dz, lo, hi, CutoffSpec(), 0)[0]) / (2 * h)
        assert np.allclose(D[1][:, ax], fd, atol=1e-6)


def test_potential_derivatives_match_finite_differences():
    rng = np.random.default_rng(5)
    a, b = _unit_pair(rng, 2)
    lo, hi = unit_box(2)
    spec = WaveSpec(a, b, n=6.0, L=0.7, lo=lo, hi=hi)
    z = rng.uniform(0.15, 0.85, size=(5, 3))
    D = potential_value_and_derivs(spec, z, 3)
    h = 1e-5
    for ax in range(3):
        dz = np.zeros(3)
        dz[ax] = h
        up = potential_value_and_derivs(spec, z + dz, 2)
        dn = potential_value_and_derivs(spec, z - dz, 2)
        assert np.allclose(D[1][:, ax], (up[0] - dn[0]) / (2 * h), rtol=1e-6, atol=1e-9)
        assert np.allclose(D[3][:, :, :, ax], (up[2] - dn[2]) / (2 * h), rtol=1e-5, atol=1e-6)


def test_exact_core_cubic_potential():
    rng = np.random.default_rng(9)
    a, b = _unit_pair(rng, 3)
    eta = eta_direction(a, b)
    # psi(s) = s^3 along eta: D^3 psi = 6 eta (x) eta (x) eta
    D3 = 6.0 * np.einsum("k,l,m->klm", eta, eta, eta)
    w, V = apply_symbol_to_derivs(a, b, D3)
    B = block_matrix(a, b)
    assert np.abs(w - 6 * B[0, 1:]).max() < 1e-10
    assert np.abs(V - 6 * B[1:, 1:]).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), N=st.sampled_from([2, 3]), n=st.sampled_from([4.0, 16.0, 64.0]))
def test_divergence_identity_analytic(seed, N, n):
    rng = np.random.default_rng(seed)
    a, b = _unit_pair(rng, N)
    if np.linalg.norm(a + b) < 1e-2:
        return
    lo, hi = unit_box(N)
    spec = WaveSpec(a, b, n=n, L=0.5, lo=lo, hi=hi, phase=rng.uniform(0, 6))
    z = rng.uniform(0, 1, size=(200, N + 1))
    f = apply_A_points(spec, z)
    scale = n * max(np.abs(f.w).max(), np.abs(f.V).max(), 1e-300)
    assert np.abs(divergence_residual_points(spec, z)).max() <= 1e-8 * scale


def test_fields_vanish_outside_box():
    rng = np.random.default_rng(3)
    a, b = _unit_pair(rng, 2)
    spec = WaveSpec(a, b, n=8.0, L=1.0, lo=np.array([0.2, 0.2, 0.2]), hi=np.array([0.6, 0.7, 0.8]))
    z = spacetime_points([np.linspace(0, 1, 21)] * 3)
    out = ~np.all((z > spec.lo) & (z < spec.hi), axis=1)
    w, V, _ = apply_A(spec, z)
    assert np.all(w[out] == 0.0) and np.all(V[out] == 0.0)
    assert np.abs(w[~out]).max() > 0


def test_remainder_bound_is_order_one():
    rng = np.random.default_rng(4)
    a, b = _unit_pair(rng, 2)
    z = rng.uniform(0, 1, size=(2000, 3))
    bounds = [apply_A(WaveSpec(a, b, n=n, L=0.5, lo=np.zeros(3), hi=np.ones(3)), z)[2] for n in (16, 32, 64, 128)]
    assert max(bounds) < 3 * min(bounds)


def test_leading_term_amplitude():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    spec = WaveSpec(a, b, n=64.0, L=0.5, lo=np.zeros(3), hi=np.ones(3))
    z = spacetime_points([np.linspace(0.3, 0.7, 9)] * 3)
    f = apply_A_points(spec, z)
    assert np.abs(f.leading_w).max() <= 0.5 * np.linalg.norm(a - b) + 1e-12


def test_degenerate_wave_is_zero():
    spec = WaveSpec(np.array([1.0, 0.0]), np.array([1.0, 0.0]), n=8.0, L=1.0, lo=np.zeros(3), hi=np.ones(3))
    w, V, R = apply_A(spec, np.full((4, 3), 0.5))
    assert not w.any() and not V.any() and R == 0.0


def test_spectral_divergence_improves_with_resolution():
    a, b = np.array([1.0, 0.0]), np.array([-0.6, 0.8])
    spec = WaveSpec(a, b, n=8.0, L=0.25, lo=np.zeros(3), hi=np.ones(3))

    def resid(res):
        x = np.arange(res) / res
        f = apply_A_points(spec, spacetime_points([x] * 3))
        w = f.w.reshape(res, res, res, 2)
        V = f.V.reshape(res, res, res, 2, 2)
        k = 2 * np.pi * np.fft.fftfreq(res, 1 / res)
        k[res // 2] = 0

        def d(F, ax):
            shape = [1] * F.ndim
            shape[ax] = res
            return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(F, axis=ax), axis=ax).real
        r = [d(w[..., i], 0) + sum(d(V[..., i, j], j + 1) for j in range(2)) for i in range(2)]
        return np.abs(np.array(r)).max() / max(np.abs(w).max(), np.abs(V).max())
    assert resid(64) < 0.5 * resid(32)
