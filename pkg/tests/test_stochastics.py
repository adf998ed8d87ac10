import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wildeuler.stochastics import (GridError, ParameterError, discrete_holder_norm, grid_size, holder_process,
                                   holder_quotients, sample_wiener, stop_path, stopping_time, zero_stopped_path)


def test_grid_size_rejects_non_divisor():
    assert grid_size(1.0, 2 ** -10) == 1024
    with pytest.raises(GridError):
        grid_size(1.0, 0.3)


def test_wiener_starts_at_zero_and_is_seeded():
    p = sample_wiener(4, 1.0, 2 ** -8)
    q = sample_wiener(4, 1.0, 2 ** -8)
    assert p.values[0] == 0.0
    assert np.array_equal(p.values, q.values)
    assert not np.array_equal(p.values, sample_wiener(5, 1.0, 2 ** -8).values)


def test_increment_variance_matches_dt():
    dt = 2 ** -10
    incr = np.concatenate([np.diff(sample_wiener(s, 1.0, dt).values) for s in range(40)])
    assert abs(incr.var() / dt - 1.0) < 0.05


def test_holder_quotients_against_loops():
    rng = np.random.default_rng(0)
    b = np.concatenate([[0.0], np.cumsum(rng.standard_normal(40))])
    q = holder_quotients(b, 0.1, 0.3, block=7)
    ref = [max((abs(b[k] - b[i]) / ((k - i) * 0.1) ** 0.3 for i in range(k)), default=0.0) for k in range(b.size)]
    assert np.allclose(q, ref, rtol=0, atol=1e-14)


def test_holder_process_is_nondecreasing():
    O = holder_process(sample_wiener(1, 1.0, 2 ** -8), 0.25).O_values
    assert O[0] == 0.0
    assert np.all(np.diff(O) >= 0)


def test_exponent_validated():
    with pytest.raises(ParameterError):
        holder_process(sample_wiener(0, 1.0, 0.25), 0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), M=st.floats(0.2, 3.0))
def test_stopped_norm_bounded_by_M(seed, M):
    path = sample_wiener(seed, 1.0, 2 ** -7)
    stp = stop_path(path, 0.25, M)
    assert discrete_holder_norm(stp.values, path.dt, 0.25) <= M
    assert np.all(stp.values[stp.freeze_index:] == stp.values[stp.freeze_index])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_tau_monotone_in_M(seed):
    path = sample_wiener(seed, 1.0, 2 ** -7)
    cert = holder_process(path, 0.25)
    taus = [stopping_time(cert, M) for M in (0.5, 1, 2, 4)]
    assert taus == sorted(taus)


def test_huge_M_never_stops():
    path = sample_wiener(3, 1.0, 2 ** -8)
    stp = stop_path(path, 0.25, 1e6)
    assert stp.tau == 1.0 and not stp.exceeded
    assert np.array_equal(stp.values, path.values)


def test_stopped_path_agrees_before_tau():
    path = sample_wiener(2, 1.0, 2 ** -8)
    stp = stop_path(path, 0.25, 0.5)
    assert stp.exceeded
    k = stp.freeze_index
    assert np.array_equal(stp.values[: k + 1], path.values[: k + 1])
    assert not stp.frozen_mask()[k] and stp.frozen_mask()[k + 1]


def test_zero_path():
    z = zero_stopped_path(1.0, 2 ** -6)
    assert np.all(z.values == 0) and z.norm == 0.0
