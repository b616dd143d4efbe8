"""
Curvature machinery shared by aSNAQ and adaQN: the (s, y) pair buffer, the aFIM
gradient buffer, accumulated squared gradients for the diagonal H0, and the
limited-memory two-loop recursion that applies the implied inverse Hessian.
"""
import logging
from collections import deque

import numpy as np

from nsqn.numkit import ParamVector, dot

logger = logging.getLogger(__name__)


class PreconditionError(ValueError):
    """Raised when an operation is called on a buffer state it does not accept."""
    pass


class InvariantViolation(RuntimeError):
    """Raised when a stored curvature pair has y's = 0, which admission should have prevented."""
    pass


def curvature_admit(s: ParamVector, y: ParamVector, eps_curv: float, min_curvature: float = 0.0) -> bool:
    """
    True iff s'y > eps_curv * y'y and s'y >= min_curvature * s's.
    The second test rejects pairs whose s runs mostly along directions the
    loss is flat in.
    """
    sy = dot(s, y)
    return sy > eps_curv * dot(y, y) and sy >= min_curvature * dot(s, s)


class CurvatureBuffer:
    """FIFO of admitted (s, y) pairs, oldest first, at most capacity pairs."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise PreconditionError(f"curvature buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._pairs: deque[tuple[ParamVector, ParamVector]] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def admit(self, s: ParamVector, y: ParamVector, eps_curv: float, min_curvature: float = 0.0) -> bool:
        """Store (s, y) if it passes the admission test; returns whether it was stored."""
        if not curvature_admit(s, y, eps_curv, min_curvature):
            logger.debug(
                "curvature pair rejected: s'y=%.3e y'y=%.3e s's=%.3e", dot(s, y), dot(y, y), dot(s, s)
            )
            return False
        self._pairs.append((s.copy(), y.copy()))
        return True

    def clear(self) -> None:
        self._pairs.clear()


class FimBuffer:
    """FIFO of raw gradients standing in for the accumulated Fisher matrix."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise PreconditionError(f"aFIM buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._grads: deque[ParamVector] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._grads)

    def push(self, grad: ParamVector) -> None:
        self._grads.append(grad.copy())

    def clear(self) -> None:
        self._grads.clear()

    def stacked(self) -> np.ndarray:
        """Gradients as a [|F|, d] array, oldest row first."""
        return np.stack(list(self._grads))


class AccumGradSquares:
    """Running elementwise sum of squared gradients. Never reset."""

    def __init__(self, d: int):
        self.values = np.zeros(d)

    def add(self, grad: ParamVector) -> None:
        self.values += grad * grad


def h0_diag(accum: AccumGradSquares, eps_h0: float) -> ParamVector:
    """Diagonal initial inverse Hessian, 1 / sqrt(sum of squared gradients + eps_h0)."""
    return 1.0 / np.sqrt(accum.values + eps_h0)


def fim_y(fim: FimBuffer, s: ParamVector) -> ParamVector:
    """y = (1/|F|) sum_i g_i (g_i' s), computed without forming any d x d matrix."""
    if len(fim) == 0:
        raise PreconditionError("fim_y needs at least one stored gradient")
    G = fim.stacked()
    return G.T @ (G @ s) / G.shape[0]


def two_loop_direction(grad: ParamVector, buf: CurvatureBuffer, h0: ParamVector) -> ParamVector:
    """
    g = -H grad, with H the L-BFGS operator built from buf over diag(h0).

    The second loop adds (sigma_i - beta) s_i; that sign is the one consistent
    with the dense BFGS recurrence.
    """
    pairs = list(buf)
    rho = []
    for s, y in pairs:
        ys = dot(y, s)
        if ys == 0.0:
            raise InvariantViolation("curvature pair with y's = 0 in buffer")
        rho.append(1.0 / ys)

    eta = grad.copy()
    sigma = [0.0] * len(pairs)
    for i in range(len(pairs) - 1, -1, -1):
        s, y = pairs[i]
        sigma[i] = rho[i] * dot(s, eta)
        eta -= sigma[i] * y

    eta *= h0

    for i, (s, y) in enumerate(pairs):
        beta = rho[i] * dot(y, eta)
        eta += (sigma[i] - beta) * s
    return -eta
