import numpy as np
import pytest

from nsqn.curvature import (
    AccumGradSquares,
    CurvatureBuffer,
    FimBuffer,
    InvariantViolation,
    PreconditionError,
    curvature_admit,
    fim_y,
    h0_diag,
    two_loop_direction,
)


def test_curvature_admit():
    assert curvature_admit(np.array([1.0, 0.0]), np.array([2.0, 0.0]), 1e-8)
    assert not curvature_admit(np.zeros(2), np.array([2.0, 0.0]), 1e-8)
    assert not curvature_admit(np.array([1.0, 0.0]), np.array([-2.0, 0.0]), 1e-8)


def test_curvature_buffer_is_fifo_and_bounded():
    buf = CurvatureBuffer(2)
    for i in range(1, 4):
        assert buf.admit(np.array([float(i)]), np.array([1.0]), 1e-8)
    assert len(buf) == 2
    assert [s[0] for s, _ in buf] == [2.0, 3.0]


def test_curvature_buffer_stores_copies():
    buf = CurvatureBuffer(3)
    s, y = np.array([1.0, 0.0]), np.array([2.0, 0.0])
    buf.admit(s, y, 1e-8)
    s[0] = 100.0
    stored_s, _ = next(iter(buf))
    assert stored_s[0] == 1.0


def test_rejected_pair_is_not_stored():
    buf = CurvatureBuffer(3)
    assert not buf.admit(np.array([1.0]), np.array([-1.0]), 1e-8)
    assert len(buf) == 0


def test_capacity_must_be_positive():
    with pytest.raises(PreconditionError):
        CurvatureBuffer(0)
    with pytest.raises(PreconditionError):
        FimBuffer(0)


def test_fim_buffer_bounded_and_clearable():
    fim = FimBuffer(3)
    for i in range(5):
        fim.push(np.full(2, float(i)))
    assert len(fim) == 3
    assert np.array_equal(fim.stacked()[:, 0], [2.0, 3.0, 4.0])
    fim.clear()
    assert len(fim) == 0


def test_fim_y_single_gradient():
    fim = FimBuffer(5)
    fim.push(np.array([1.0, 2.0]))
    assert np.array_equal(fim_y(fim, np.array([1.0, 1.0])), [3.0, 6.0])


def test_fim_y_matches_explicit_matrix():
    rng = np.random.default_rng(0)
    grads = rng.standard_normal((7, 12))
    fim = FimBuffer(10)
    for g in grads:
        fim.push(g)
    s = rng.standard_normal(12)
    explicit = grads.T @ grads / 7
    assert np.allclose(fim_y(fim, s), explicit @ s, rtol=1e-12, atol=1e-12)


def test_fim_y_empty_buffer():
    with pytest.raises(PreconditionError):
        fim_y(FimBuffer(3), np.ones(2))


def test_h0_diag_from_accumulated_squares():
    accum = AccumGradSquares(2)
    assert np.allclose(h0_diag(accum, 1e-8), 1e4)
    accum.add(np.array([3.0, 4.0]))
    accum.add(np.array([0.0, 0.0]))
    assert np.allclose(h0_diag(accum, 0.0), [1 / 3, 1 / 4])


def test_two_loop_empty_buffer_is_scaled_gradient():
    grad = np.array([1.0, -2.0, 0.5])
    h0 = np.array([0.5, 2.0, 1.0])
    assert np.array_equal(two_loop_direction(grad, CurvatureBuffer(5), h0), -h0 * grad)


def test_two_loop_worked_example():
    buf = CurvatureBuffer(5)
    buf.admit(np.array([1.0, 0.0]), np.array([2.0, 0.0]), 1e-8)
    g = two_loop_direction(np.array([1.0, 1.0]), buf, np.ones(2))
    assert np.allclose(g, [-0.5, -1.0], rtol=0, atol=1e-15)


def test_two_loop_satisfies_secant_on_newest_pair():
    rng = np.random.default_rng(3)
    d = 6
    buf = CurvatureBuffer(5)
    for _ in range(4):
        s = rng.standard_normal(d)
        buf.admit(s, s * rng.uniform(0.5, 2.0, size=d), 1e-8)
    s_new, y_new = list(buf)[-1]
    # H y_k = s_k for the most recent pair
    assert np.allclose(-two_loop_direction(y_new, buf, np.ones(d)), s_new, atol=1e-10)


def test_two_loop_is_a_descent_direction():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d = int(rng.integers(2, 10))
        buf = CurvatureBuffer(5)
        for _ in range(5):
            s = rng.standard_normal(d)
            B = rng.standard_normal((d, d))
            buf.admit(s, (np.eye(d) + B @ B.T) @ s, 1e-8)
        grad = rng.standard_normal(d)
        g = two_loop_direction(grad, buf, rng.uniform(0.1, 3.0, size=d))
        assert g @ grad < 0


def test_zero_curvature_pair_is_an_invariant_violation():
    buf = CurvatureBuffer(3)
    # bypasses admission on purpose
    buf._pairs.append((np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    with pytest.raises(InvariantViolation):
        two_loop_direction(np.ones(2), buf, np.ones(2))
