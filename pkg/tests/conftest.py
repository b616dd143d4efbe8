import numpy as np
import pytest

from nsqn.datasets import gen_counting
from nsqn.numkit import SeededRng
from nsqn.rnn_model import RnnSpec, SequenceBatch


class QuadraticOracle:
    """E(w) = 0.5 w'Aw - b'w with call counters, same interface as BatchOracle."""

    def __init__(self, A, b=None):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        self.grad_calls = 0
        self.loss_calls = 0

    @property
    def evaluations(self) -> int:
        return self.grad_calls + self.loss_calls

    def _loss(self, w):
        return float(0.5 * w @ self.A @ w - self.b @ w)

    def loss(self, w):
        self.loss_calls += 1
        return self._loss(w)

    def loss_and_grad(self, w):
        self.grad_calls += 1
        return self._loss(w), self.A @ w - self.b


@pytest.fixture
def quadratic():
    return QuadraticOracle


@pytest.fixture
def counting_task():
    """Small counting problem: (spec, full training batch)."""
    data = gen_counting(200, 6, SeededRng(7).spawn("data"))
    spec = RnnSpec(n_in=1, n_hidden=8, n_out=data.n_classes, T=data.T)
    return spec, data.as_batch()


@pytest.fixture
def random_batch():
    def make(spec: RnnSpec, n: int = 4, seed: int = 0) -> SequenceBatch:
        rng = np.random.default_rng(seed)
        return SequenceBatch(
            rng.standard_normal((n, spec.T, spec.n_in)),
            rng.integers(0, spec.n_out, size=n),
        )
    return make
