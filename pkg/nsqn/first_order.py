"""
First-order baselines: Adam, Adagrad and Nesterov accelerated gradient.

Each step takes the gradient from the caller, so the driver decides where it is
evaluated (NAG needs it at the look-ahead point w + momentum * velocity).
"""
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nsqn.curvature import AccumGradSquares
from nsqn.numkit import ParamVector


class AdamHyper(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(0.001, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


class AdagradHyper(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(0.01, gt=0)
    eps: float = Field(1e-8, gt=0)


class NagHyper(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)


@dataclass
class AdamState:
    m: ParamVector
    v: ParamVector
    t: int = 0

    @classmethod
    def zeros(cls, d: int) -> "AdamState":
        return cls(m=np.zeros(d), v=np.zeros(d))


def adam_step(w: ParamVector, state: AdamState, grad: ParamVector, hyper: AdamHyper) -> ParamVector:
    """Bias-corrected Adam. Advances state in place and returns the new w."""
    state.t += 1
    state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad
    state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - hyper.beta1**state.t)
    v_hat = state.v / (1.0 - hyper.beta2**state.t)
    return w - hyper.alpha * m_hat / (np.sqrt(v_hat) + hyper.eps)


def adagrad_step(
    w: ParamVector, accum: AccumGradSquares, grad: ParamVector, hyper: AdagradHyper
) -> ParamVector:
    # eps sits inside the root, same as the quasi-Newton H0 diagonal
    accum.add(grad)
    return w - hyper.alpha * grad / np.sqrt(accum.values + hyper.eps)


def nag_lookahead(w: ParamVector, velocity: ParamVector, hyper: NagHyper) -> ParamVector:
    return w + hyper.momentum * velocity


def nag_step(
    w: ParamVector, velocity: ParamVector, grad_at_lookahead: ParamVector, hyper: NagHyper
) -> tuple[ParamVector, ParamVector]:
    """v' = momentum * v - alpha * grad(w + momentum * v); w' = w + v'."""
    v_new = hyper.momentum * velocity - hyper.alpha * grad_at_lookahead
    return w + v_new, v_new
