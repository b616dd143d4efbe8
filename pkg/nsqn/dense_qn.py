"""
Dense full-batch BFGS and NAQ.

These keep an explicit d x d inverse-Hessian approximation, so they serve as
reference oracles for the limited-memory code and as small-d baselines.
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from nsqn.numkit import GradientOracle, ParamVector, dot, ensure_finite

logger = logging.getLogger(__name__)


class CurvatureError(ValueError):
    """Raised when a BFGS update is requested with s'y <= 0."""
    pass


@dataclass(frozen=True)
class DenseHessianApprox:
    matrix: NDArray[np.float64]

    @classmethod
    def identity(cls, d: int) -> "DenseHessianApprox":
        return cls(np.eye(d))

    @classmethod
    def from_diagonal(cls, diag: ParamVector) -> "DenseHessianApprox":
        return cls(np.diag(np.asarray(diag, dtype=np.float64)))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: ParamVector) -> ParamVector:
        return self.matrix @ x


def dense_bfgs_update(H: DenseHessianApprox, s: ParamVector, y: ParamVector) -> DenseHessianApprox:
    """H' = (I - rho s y') H (I - rho y s') + rho s s', rho = 1 / y's."""
    ys = dot(y, s)
    if ys <= 0.0:
        raise CurvatureError(f"BFGS update needs s'y > 0, got {ys:.3e}")
    rho = 1.0 / ys
    left = np.eye(H.d) - rho * np.outer(s, y)
    updated = left @ H.matrix @ left.T + rho * np.outer(s, s)
    # symmetrize away rounding
    return DenseHessianApprox(0.5 * (updated + updated.T))


@dataclass
class DenseStepResult:
    w: ParamVector
    v: ParamVector
    H: DenseHessianApprox
    loss: float
    grad_norm: float
    updated: bool
    descent: float


def naq_full_batch_step(
    w: ParamVector,
    v: ParamVector,
    H: DenseHessianApprox,
    mu: float,
    alpha: float,
    oracle: GradientOracle,
) -> DenseStepResult:
    """
    One NAQ iteration: g = -H grad(w + mu v), v' = mu v + alpha g, w' = w + v',
    then a BFGS update with s = w' - (w + mu v) and y = grad(w') - grad(w + mu v).
    Two gradient evaluations; the update is skipped when s'y <= 0.
    """
    ahead = w + mu * v
    loss, grad_ahead = oracle.loss_and_grad(ahead)
    ensure_finite(grad_ahead, "gradient")
    g = -H.apply(grad_ahead)
    v_new = mu * v + alpha * g
    w_new = w + v_new
    _, grad_new = oracle.loss_and_grad(w_new)
    ensure_finite(grad_new, "gradient")

    s = w_new - ahead
    y = grad_new - grad_ahead
    updated = dot(s, y) > 0.0
    if updated:
        H = dense_bfgs_update(H, s, y)
    else:
        logger.warning("NAQ: skipped inadmissible BFGS update (s'y=%.3e)", dot(s, y))
    return DenseStepResult(
        w=w_new,
        v=v_new,
        H=H,
        loss=loss,
        grad_norm=float(np.linalg.norm(grad_new)),
        updated=updated,
        descent=dot(g, grad_ahead),
    )


def bfgs_full_batch_step(
    w: ParamVector, H: DenseHessianApprox, alpha: float, oracle: GradientOracle
) -> DenseStepResult:
    """Plain BFGS with a fixed step: NAQ without momentum."""
    return naq_full_batch_step(w, np.zeros_like(w), H, 0.0, alpha, oracle)
