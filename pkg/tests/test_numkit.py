import numpy as np
import pytest

from nsqn.numkit import (
    DimensionError,
    NumericError,
    ParameterError,
    SeededRng,
    as_vector,
    axpy,
    dot,
    ensure_finite,
    l2_norm,
    sample_normal,
)


def test_same_seed_same_draws():
    a = sample_normal(SeededRng(42), 0.0, 1.0, 50)
    b = sample_normal(SeededRng(42), 0.0, 1.0, 50)
    assert np.array_equal(a, b)


def test_spawned_streams_are_reproducible_and_distinct():
    master = SeededRng(3)
    data = sample_normal(master.spawn("data"), 0.0, 1.0, 20)
    again = sample_normal(SeededRng(3).spawn("data"), 0.0, 1.0, 20)
    init = sample_normal(master.spawn("init"), 0.0, 1.0, 20)
    assert np.array_equal(data, again)
    assert not np.array_equal(data, init)


def test_spawn_does_not_advance_parent():
    a = SeededRng(5)
    a.spawn("x")
    assert np.array_equal(sample_normal(a, 0, 1, 5), sample_normal(SeededRng(5), 0, 1, 5))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_out_of_range(seed):
    with pytest.raises(ParameterError):
        SeededRng(seed)


def test_sample_normal_zero_std_returns_mean():
    assert np.all(sample_normal(SeededRng(0), 2.5, 0.0, 10) == 2.5)


def test_sample_normal_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        sample_normal(SeededRng(0), 0.0, -1.0, 3)
    with pytest.raises(ParameterError):
        sample_normal(SeededRng(0), 0.0, 1.0, 0)


def test_sample_normal_moments():
    x = sample_normal(SeededRng(1), 1.0, 0.5, 100_000)
    assert abs(x.mean() - 1.0) < 0.01
    assert abs(x.std() - 0.5) < 0.01


def test_vector_ops():
    x = as_vector([1, 2, 3])
    y = as_vector([4, 5, 6])
    assert dot(x, y) == 32.0
    assert np.array_equal(axpy(2.0, x, y), [6.0, 9.0, 12.0])
    assert l2_norm(as_vector([3, 4])) == 5.0


def test_length_mismatch():
    with pytest.raises(DimensionError):
        dot(np.ones(3), np.ones(4))
    with pytest.raises(DimensionError):
        axpy(1.0, np.ones(2), np.ones(3))


def test_ensure_finite_carries_iteration():
    ensure_finite(np.ones(3), "x")
    with pytest.raises(NumericError, match="iteration 12") as exc:
        ensure_finite(np.array([1.0, np.nan]), "gradient", iteration=12)
    assert exc.value.iteration == 12
