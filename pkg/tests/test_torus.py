import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wildeuler.torus import (MeanError, SpaceTimeField, TorusGrid, cumulative_time_integral, derivative,
                             divergence, elliptic_operator, gradient, helmholtz_project, integrate,
                             integrate_time, laplacian, solve_elliptic_m, tensor_divergence,
                             traceless_symmetric_gradient, vector_gradient)


def _trig_field(grid, rng, modes=3, comps=None):
    X = grid.coords
    shape = () if comps is None else (comps,)
    out = np.zeros(shape + grid.shape)
    for idx in np.ndindex(*shape) if shape else [()]:
        for _ in range(modes):
            k = rng.integers(-3, 4, size=grid.dim)
            out[idx] += rng.uniform(-1, 1) * np.cos(2 * np.pi * sum(ki * x for ki, x in zip(k, X)) + rng.uniform(0, 6))
    return out


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(2, 12)
    with pytest.raises(ValueError):
        TorusGrid(4, 16)


def test_derivative_of_sine_is_exact(grid16):
    x, y = grid16.coords
    f = np.sin(2 * np.pi * 3 * x) * np.cos(2 * np.pi * y)
    df = 6 * np.pi * np.cos(2 * np.pi * 3 * x) * np.cos(2 * np.pi * y)
    assert np.abs(derivative(grid16, f, 0) - df).max() < 1e-12
    assert np.abs(laplacian(grid16, f) + (4 * np.pi ** 2) * 10 * f).max() < 1e-10


def test_constant_has_zero_gradient(grid16):
    assert np.abs(gradient(grid16, np.full(grid16.shape, 3.0))).max() < 1e-14


@pytest.mark.parametrize("N,res", [(2, 32), (3, 16)])
def test_helmholtz_split_reassembles(N, res, rng):
    g = TorusGrid(N, res)
    u = _trig_field(g, rng, comps=N) + rng.uniform(-1, 1, size=(N,) + (1,) * N)
    sp = helmholtz_project(g, u)
    rec = sp.solenoidal + gradient(g, sp.potential) + sp.mean.reshape((N,) + (1,) * N)
    assert np.abs(rec - u).max() < 1e-12
    assert np.abs(divergence(g, sp.solenoidal)).max() < 1e-10
    assert np.abs(integrate(g, sp.solenoidal)).max() < 1e-14


def test_projection_idempotent(grid16, rng):
    u = rng.standard_normal((2,) + grid16.shape)
    P1 = helmholtz_project(grid16, u).solenoidal
    P2 = helmholtz_project(grid16, P1).solenoidal
    assert np.abs(P2 - P1).max() < 1e-12 * np.abs(P1).max()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), N=st.sampled_from([2, 3]))
def test_elliptic_manufactured_recovery(seed, N):
    rng = np.random.default_rng(seed)
    g = TorusGrid(N, 16)
    m = _trig_field(g, rng, comps=N)
    m -= integrate(g, m).reshape((N,) + (1,) * N)
    m_rec, Mt = solve_elliptic_m(g, elliptic_operator(g, m))
    assert np.abs(m_rec - m).max() < 1e-8 * max(1.0, np.abs(m).max())
    tr = sum(Mt[i, i] for i in range(N))
    assert np.abs(tr).max() < 1e-12
    assert np.array_equal(Mt, np.swapaxes(Mt, 0, 1))


def test_elliptic_rejects_mean(grid16):
    rhs = np.ones((2,) + grid16.shape)
    with pytest.raises(MeanError):
        solve_elliptic_m(grid16, rhs)


def test_corrector_solves_divergence_equation(grid16, rng):
    rhs = _trig_field(grid16, rng, comps=2)
    rhs -= integrate(grid16, rhs).reshape((2, 1, 1))
    _, Mt = solve_elliptic_m(grid16, rhs)
    assert np.abs(tensor_divergence(grid16, Mt) - rhs).max() < 1e-10 * np.abs(rhs).max()


def test_vector_gradient_layout(grid16):
    x, y = grid16.coords
    u = np.stack([np.sin(2 * np.pi * y), np.zeros_like(x)])
    G = vector_gradient(grid16, u)
    assert np.abs(G[0, 1] - 2 * np.pi * np.cos(2 * np.pi * y)).max() < 1e-12
    assert np.abs(G[0, 0]).max() < 1e-12


def test_traceless_symmetric_gradient_is_traceless(grid16, rng):
    m = _trig_field(grid16, rng, comps=2)
    S = traceless_symmetric_gradient(grid16, m)
    assert np.abs(S[0, 0] + S[1, 1]).max() < 1e-12


def test_time_quadrature():
    t = np.linspace(0, 1, 65)
    assert abs(integrate_time(t ** 2, t[1]) - 1 / 3) < 1e-4
    c = cumulative_time_integral(2 * t, t[1])
    assert np.abs(c - t ** 2).max() < 1e-12


def test_spacetime_field_shape_checks(grid16):
    SpaceTimeField(grid16, np.linspace(0, 1, 3), np.zeros((3, 2) + grid16.shape), "vector")
    with pytest.raises(ValueError):
        SpaceTimeField(grid16, np.linspace(0, 1, 3), np.zeros((2,) + grid16.shape))
