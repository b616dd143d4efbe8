import numpy as np
import pytest

from nsqn.numkit import DimensionError, ParameterError, SeededRng
from nsqn.rnn_model import (
    BatchOracle,
    RnnSpec,
    SequenceBatch,
    accuracy,
    backward,
    evaluate,
    forward,
    grad_at_shifted,
    grad_check,
    init_params,
    loss_ce,
    loss_mse,
)


def test_param_count_counting_network():
    # 24 hidden units, T=20 counting task: 21 classes
    spec = RnnSpec(n_in=1, n_hidden=24, n_out=21, T=20)
    assert spec.n_params == 24 + 576 + 24 + 504 + 21


def test_spec_rejects_zero_sizes():
    with pytest.raises(ParameterError):
        RnnSpec(n_in=1, n_hidden=0, n_out=2, T=3)


def test_unpack_layout():
    spec = RnnSpec(n_in=2, n_hidden=3, n_out=2, T=1)
    params = np.arange(spec.n_params, dtype=np.float64)
    W_xh, W_hh, b_h, W_hy, b_y = spec.unpack(params)
    assert W_xh.shape == (3, 2) and W_xh[0, 1] == 1.0
    assert W_hh.shape == (3, 3) and W_hh[0, 0] == 6.0
    assert np.array_equal(b_h, [15.0, 16.0, 17.0])
    assert W_hy.shape == (2, 3) and W_hy[0, 0] == 18.0
    assert np.array_equal(b_y, [24.0, 25.0])


def test_unpack_wrong_length():
    spec = RnnSpec(n_in=1, n_hidden=2, n_out=2, T=1)
    with pytest.raises(DimensionError):
        spec.unpack(np.zeros(spec.n_params + 1))


def test_init_params_scale():
    spec = RnnSpec(n_in=1, n_hidden=24, n_out=21, T=20)
    w = init_params(spec, SeededRng(0))
    assert w.shape == (spec.n_params,)
    assert 0.008 < w.std() < 0.012


def test_zero_params_give_uniform_prediction(random_batch):
    spec = RnnSpec(n_in=3, n_hidden=4, n_out=5, T=3)
    batch = random_batch(spec)
    cache = forward(np.zeros(spec.n_params), spec, batch)
    assert np.allclose(cache.probs, 0.2)
    assert loss_ce(cache, batch) == pytest.approx(np.log(5))
    assert np.all(cache.hidden[:, 0] == 0.0)


def test_probs_are_distributions(random_batch):
    spec = RnnSpec(n_in=3, n_hidden=4, n_out=5, T=4)
    batch = random_batch(spec)
    w = init_params(spec, SeededRng(1)) * 30
    cache = forward(w, spec, batch)
    assert np.allclose(cache.probs.sum(axis=1), 1.0)
    assert 0.0 <= accuracy(cache, batch) <= 1.0
    assert loss_mse(cache, batch) >= 0.0


def test_batch_shape_checks():
    spec = RnnSpec(n_in=2, n_hidden=3, n_out=2, T=4)
    with pytest.raises(DimensionError):
        SequenceBatch(np.zeros((3, 4)), np.zeros(3, dtype=int))
    with pytest.raises(DimensionError):
        SequenceBatch(np.zeros((3, 4, 2)), np.zeros(2, dtype=int))
    wrong_T = SequenceBatch(np.zeros((3, 5, 2)), np.zeros(3, dtype=int))
    with pytest.raises(DimensionError):
        forward(np.zeros(spec.n_params), spec, wrong_T)
    bad_label = SequenceBatch(np.zeros((1, 4, 2)), np.array([2]))
    with pytest.raises(DimensionError):
        forward(np.zeros(spec.n_params), spec, bad_label)


@pytest.mark.parametrize("T", [1, 3, 8])
def test_backward_matches_finite_differences(T, random_batch):
    spec = RnnSpec(n_in=2, n_hidden=4, n_out=3, T=T)
    err = grad_check(spec, random_batch(spec, seed=T), SeededRng(T))
    assert err < 1e-6


def test_grad_check_detects_wrong_gradient(random_batch):
    spec = RnnSpec(n_in=2, n_hidden=3, n_out=3, T=2)

    def halved(params, spec, batch):
        loss, grad = backward(params, spec, batch)
        return loss, grad * 0.5

    assert grad_check(spec, random_batch(spec), SeededRng(0), gradient_fn=halved) > 1e-3


def test_grad_at_shifted_leaves_params_untouched(random_batch):
    spec = RnnSpec(n_in=2, n_hidden=3, n_out=3, T=3)
    batch = random_batch(spec)
    rng = SeededRng(4)
    w = init_params(spec, rng)
    v = init_params(spec, rng)
    w_before = w.copy()
    loss, grad = grad_at_shifted(w, v, 0.7, spec, batch)
    ref_loss, ref_grad = backward(w + 0.7 * v, spec, batch)
    assert np.array_equal(w, w_before)
    assert loss == ref_loss
    assert np.array_equal(grad, ref_grad)


def test_batch_oracle_counts_calls(counting_task):
    spec, batch = counting_task
    oracle = BatchOracle(spec, batch.take(slice(0, 10)))
    w = init_params(spec, SeededRng(0))
    oracle.loss_and_grad(w)
    oracle.loss_and_grad(w)
    oracle.loss(w)
    assert (oracle.grad_calls, oracle.loss_calls, oracle.evaluations) == (2, 1, 3)


def test_evaluate_is_chunk_independent(counting_task):
    spec, batch = counting_task
    w = init_params(spec, SeededRng(2))
    whole = evaluate(w, spec, batch, "mse")
    chunked = evaluate(w, spec, batch, "mse", chunk=7)
    assert whole == pytest.approx(chunked, rel=1e-12)


def test_evaluate_rejects_unknown_metric(counting_task):
    spec, batch = counting_task
    with pytest.raises(ParameterError):
        evaluate(np.zeros(spec.n_params), spec, batch, "f1")


def test_forward_matches_step_by_step_recurrence(random_batch):
    spec = RnnSpec(n_in=3, n_hidden=4, n_out=5, T=6)
    batch = random_batch(spec, n=3, seed=2)
    params = init_params(spec, SeededRng(3)) * 20
    W_xh, W_hh, b_h, W_hy, b_y = spec.unpack(params)
    cache = forward(params, spec, batch)
    for n in range(batch.size):
        h = np.zeros(spec.n_hidden)
        for t in range(spec.T):
            h = np.array([
                np.tanh(sum(W_xh[j, i] * batch.inputs[n, t, i] for i in range(spec.n_in))
                        + sum(W_hh[j, m] * h[m] for m in range(spec.n_hidden)) + b_h[j])
                for j in range(spec.n_hidden)
            ])
            assert np.allclose(cache.hidden[n, t + 1], h, rtol=0, atol=1e-12)
        logits = W_hy @ h + b_y
        probs = np.exp(logits) / np.exp(logits).sum()
        assert np.allclose(cache.probs[n], probs, rtol=0, atol=1e-12)


def test_mse_of_uniform_two_class_prediction():
    spec = RnnSpec(n_in=1, n_hidden=2, n_out=2, T=3)
    batch = SequenceBatch(np.ones((4, 3, 1)), np.array([0, 1, 1, 0]))
    cache = forward(np.zeros(spec.n_params), spec, batch)
    assert loss_mse(cache, batch) == pytest.approx(0.25, abs=1e-15)


def test_gradient_is_size_weighted_mean_over_sub_batches(random_batch):
    spec = RnnSpec(n_in=2, n_hidden=5, n_out=3, T=7)
    batch = random_batch(spec, n=10, seed=4)
    params = init_params(spec, SeededRng(5)) * 30
    loss, grad = backward(params, spec, batch)
    parts = [slice(0, 3), slice(3, 10)]
    weighted_grad = np.zeros_like(grad)
    weighted_loss = 0.0
    for part in parts:
        sub = batch.take(part)
        sub_loss, sub_grad = backward(params, spec, sub)
        weighted_grad += sub.size * sub_grad / batch.size
        weighted_loss += sub.size * sub_loss / batch.size
    assert np.allclose(grad, weighted_grad, rtol=0, atol=1e-12)
    assert loss == pytest.approx(weighted_loss, abs=1e-12)
