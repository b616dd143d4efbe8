"""
Single-layer tanh recurrent network with softmax output read from the final hidden state.

backward() is exact backpropagation through the full unrolled sequence; it is the
stochastic gradient oracle the optimizers consume. Parameters travel as one flat
vector laid out as [W_xh, W_hh, b_h, W_hy, b_y] (row-major matrices).
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from nsqn.numkit import (
    DimensionError,
    ParamVector,
    ParameterError,
    SeededRng,
    axpy,
    ensure_finite,
    sample_normal,
)

logger = logging.getLogger(__name__)

INIT_STD = 0.01
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class RnnSpec:
    n_in: int
    n_hidden: int
    n_out: int
    T: int

    def __post_init__(self):
        for name in ("n_in", "n_hidden", "n_out", "T"):
            if getattr(self, name) < 1:
                raise ParameterError(f"RnnSpec.{name} must be >= 1, got {getattr(self, name)}")

    @property
    def n_params(self) -> int:
        h = self.n_hidden
        return self.n_in * h + h * h + h + h * self.n_out + self.n_out

    def unpack(self, params: ParamVector) -> tuple[NDArray, NDArray, NDArray, NDArray, NDArray]:
        """Views (W_xh, W_hh, b_h, W_hy, b_y) into params."""
        if params.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got shape {params.shape}")
        h, i, o = self.n_hidden, self.n_in, self.n_out
        sizes = [h * i, h * h, h, o * h, o]
        parts = np.split(params, np.cumsum(sizes)[:-1])
        return (
            parts[0].reshape(h, i),
            parts[1].reshape(h, h),
            parts[2],
            parts[3].reshape(o, h),
            parts[4],
        )


@dataclass(frozen=True)
class SequenceBatch:
    inputs: NDArray[np.float64]  # [batch, T, n_in]
    targets: NDArray[np.int64]  # [batch]

    def __post_init__(self):
        if self.inputs.ndim != 3:
            raise DimensionError(f"inputs must be [batch, T, n_in], got shape {self.inputs.shape}")
        if self.targets.shape != (self.inputs.shape[0],):
            raise DimensionError(
                f"targets shape {self.targets.shape} does not match batch size {self.inputs.shape[0]}"
            )
        if self.inputs.shape[0] < 1:
            raise DimensionError("batch must hold at least one sequence")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    def take(self, indices) -> "SequenceBatch":
        return SequenceBatch(self.inputs[indices], self.targets[indices])

    def check_against(self, spec: RnnSpec) -> None:
        _, T, n_in = self.inputs.shape
        if T != spec.T or n_in != spec.n_in:
            raise DimensionError(f"batch is [*, {T}, {n_in}] but spec expects [*, {spec.T}, {spec.n_in}]")
        if self.targets.min() < 0 or self.targets.max() >= spec.n_out:
            raise DimensionError(f"targets must lie in [0, {spec.n_out})")


@dataclass(frozen=True)
class ForwardCache:
    hidden: NDArray[np.float64]  # [batch, T+1, n_hidden], hidden[:, 0] = h_0 = 0
    logits: NDArray[np.float64]  # [batch, n_out]
    probs: NDArray[np.float64]  # [batch, n_out]


def init_params(spec: RnnSpec, rng: SeededRng) -> ParamVector:
    """All weights and biases drawn from N(0, 0.01^2)."""
    return sample_normal(rng, 0.0, INIT_STD, spec.n_params)


def _softmax(logits: NDArray) -> NDArray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: ParamVector, spec: RnnSpec, batch: SequenceBatch) -> ForwardCache:
    W_xh, W_hh, b_h, W_hy, b_y = spec.unpack(params)
    batch.check_against(spec)
    x = batch.inputs
    n = batch.size
    hidden = np.zeros((n, spec.T + 1, spec.n_hidden))
    for t in range(spec.T):
        hidden[:, t + 1] = np.tanh(x[:, t] @ W_xh.T + hidden[:, t] @ W_hh.T + b_h)
    logits = hidden[:, spec.T] @ W_hy.T + b_y
    ensure_finite(logits, "logits")
    return ForwardCache(hidden=hidden, logits=logits, probs=_softmax(logits))


def sample_losses(cache: ForwardCache, batch: SequenceBatch) -> NDArray[np.float64]:
    p = cache.probs[np.arange(batch.size), batch.targets]
    return -np.log(np.maximum(p, PROB_FLOOR))


def loss_ce(cache: ForwardCache, batch: SequenceBatch) -> float:
    """Mean cross-entropy over the batch."""
    return float(sample_losses(cache, batch).mean())


def loss_mse(cache: ForwardCache, batch: SequenceBatch) -> float:
    """Mean over batch and classes of (probability - one-hot target)^2."""
    onehot = np.zeros_like(cache.probs)
    onehot[np.arange(batch.size), batch.targets] = 1.0
    return float(np.mean((cache.probs - onehot) ** 2))


def accuracy(cache: ForwardCache, batch: SequenceBatch) -> float:
    return float(np.mean(cache.probs.argmax(axis=1) == batch.targets))


def backward(params: ParamVector, spec: RnnSpec, batch: SequenceBatch) -> tuple[float, ParamVector]:
    """Cross-entropy loss and its exact batch-averaged gradient (full BPTT)."""
    W_xh, W_hh, b_h, W_hy, b_y = spec.unpack(params)
    cache = forward(params, spec, batch)
    loss = loss_ce(cache, batch)
    n = batch.size
    x, hidden = batch.inputs, cache.hidden

    d_logits = cache.probs.copy()
    d_logits[np.arange(n), batch.targets] -= 1.0
    d_logits /= n

    g_W_hy = d_logits.T @ hidden[:, spec.T]
    g_b_y = d_logits.sum(axis=0)
    g_W_xh = np.zeros_like(W_xh)
    g_W_hh = np.zeros_like(W_hh)
    g_b_h = np.zeros_like(b_h)

    d_h = d_logits @ W_hy
    for t in range(spec.T, 0, -1):
        d_raw = d_h * (1.0 - hidden[:, t] ** 2)
        g_W_xh += d_raw.T @ x[:, t - 1]
        g_W_hh += d_raw.T @ hidden[:, t - 1]
        g_b_h += d_raw.sum(axis=0)
        d_h = d_raw @ W_hh

    grad = np.concatenate([g_W_xh.ravel(), g_W_hh.ravel(), g_b_h, g_W_hy.ravel(), g_b_y])
    ensure_finite(grad, "gradient")
    return loss, grad


def grad_at_shifted(
    params: ParamVector, v: ParamVector, mu: float, spec: RnnSpec, batch: SequenceBatch
) -> tuple[float, ParamVector]:
    """Nesterov look-ahead gradient at params + mu*v; params is left untouched."""
    return backward(axpy(mu, v, params), spec, batch)


def grad_check(
    spec: RnnSpec,
    batch: SequenceBatch,
    rng: SeededRng,
    step: float = 1e-5,
    init_std: float = 0.3,
    gradient_fn: Callable[[ParamVector, RnnSpec, SequenceBatch], tuple[float, ParamVector]] = backward,
) -> float:
    """
    Max relative error between gradient_fn and central finite differences,
    measured as |a-b| / max(1, |a|+|b|) per component. gradient_fn is
    swappable so callers can feed a deliberately broken gradient.
    """
    params = sample_normal(rng, 0.0, init_std, spec.n_params)
    _, analytic = gradient_fn(params, spec, batch)
    numeric = np.empty_like(params)
    shifted = params.copy()
    for i in range(params.size):
        shifted[i] = params[i] + step
        up = loss_ce(forward(shifted, spec, batch), batch)
        shifted[i] = params[i] - step
        down = loss_ce(forward(shifted, spec, batch), batch)
        shifted[i] = params[i]
        numeric[i] = (up - down) / (2.0 * step)
    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic) + np.abs(numeric))
    return float(rel.max())


class BatchOracle:
    """GradientOracle over one SequenceBatch, counting loss-only and gradient calls."""

    def __init__(self, spec: RnnSpec, batch: SequenceBatch):
        batch.check_against(spec)
        self.spec = spec
        self.batch = batch
        self.grad_calls = 0
        self.loss_calls = 0

    @property
    def evaluations(self) -> int:
        return self.grad_calls + self.loss_calls

    def loss(self, w: ParamVector) -> float:
        self.loss_calls += 1
        return loss_ce(forward(w, self.spec, self.batch), self.batch)

    def loss_and_grad(self, w: ParamVector) -> tuple[float, ParamVector]:
        self.grad_calls += 1
        return backward(w, self.spec, self.batch)


def evaluate(
    params: ParamVector, spec: RnnSpec, data: SequenceBatch, metric: str, chunk: int = 1000
) -> tuple[float, float]:
    """
    (cross-entropy, task metric) over a whole dataset, evaluated in chunks.
    metric is "mse" or "accuracy"; chunks are visited in sample order.
    """
    if metric not in ("mse", "accuracy"):
        raise ParameterError(f"unknown metric {metric!r}")
    total_ce = 0.0
    total_metric = 0.0
    for start in range(0, data.size, chunk):
        part = data.take(slice(start, start + chunk))
        cache = forward(params, spec, part)
        total_ce += loss_ce(cache, part) * part.size
        m = loss_mse(cache, part) if metric == "mse" else accuracy(cache, part)
        total_metric += m * part.size
    return total_ce / data.size, total_metric / data.size
