"""
aSNAQ (adaptive stochastic Nesterov-accelerated quasi-Newton) and the adaQN baseline.

Both run the same aggregation cycle: every L iterations the averaged iterate w_n
is compared with the previous aggregate w_o on the current mini-batch. A loss
increase beyond gamma clears the curvature and aFIM buffers and rolls back;
otherwise a new (s, y) pair is built from the aFIM and stored if admissible.
aSNAQ adds the Nesterov look-ahead gradient, unit-norm directions and a momentum
term that grows by phi on success and shrinks by phi on rollback.
"""
import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nsqn.curvature import (
    AccumGradSquares,
    CurvatureBuffer,
    FimBuffer,
    fim_y,
    h0_diag,
    two_loop_direction,
)
from nsqn.numkit import GradientOracle, ParamVector, dot, ensure_finite, l2_norm

logger = logging.getLogger(__name__)


class Hyperparams(BaseModel):
    """Defaults are the published settings for all experiments."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(0.01, gt=0)
    mu_min: float = Field(0.1, gt=0, lt=1)
    mu_max: float = Field(0.99, gt=0, lt=1)
    phi: float = Field(1.1, gt=1)
    gamma: float = Field(1.01, ge=1)
    L: int = Field(5, ge=1)
    m_L: int = Field(10, ge=1)
    m_F: int = Field(100, ge=1)
    eps_h0: float = Field(1e-8, gt=0)
    eps_curv: float = Field(1e-8, gt=0)
    # s'y / s's floor for storing a pair; 0 keeps only the eps_curv test
    min_curvature: float = Field(1e-4, ge=0)
    k_max: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _momentum_bounds(self):
        if self.mu_min > self.mu_max:
            raise ValueError(f"mu_min ({self.mu_min}) must be <= mu_max ({self.mu_max})")
        return self


@dataclass
class StepReport:
    loss: float
    direction_norm_pre: float
    reset_triggered: bool
    pair_stored: bool
    mu_after: float
    buffer_sizes: tuple[int, int]
    descent: float = 0.0  # g'grad of the raw direction
    aggregated: bool = False


@dataclass
class AsnaqState:
    w: ParamVector
    v: ParamVector
    w_o: ParamVector
    v_o: ParamVector
    w_s: ParamVector
    v_s: ParamVector
    mu: float
    curvature: CurvatureBuffer
    fim: FimBuffer
    accum: AccumGradSquares
    t: int = 0
    k: int = 0
    n_summed: int = 0
    resets: int = 0
    pairs_stored: int = 0

    @classmethod
    def initial(cls, w0: ParamVector, hp: Hyperparams) -> "AsnaqState":
        d = w0.shape[0]
        return cls(
            w=w0.copy(),
            v=np.zeros(d),
            w_o=w0.copy(),
            v_o=np.zeros(d),
            w_s=np.zeros(d),
            v_s=np.zeros(d),
            mu=hp.mu_min,
            curvature=CurvatureBuffer(hp.m_L),
            fim=FimBuffer(hp.m_F),
            accum=AccumGradSquares(d),
        )

    def buffer_sizes(self) -> tuple[int, int]:
        return len(self.curvature), len(self.fim)


def _aggregate(
    state: AsnaqState, hp: Hyperparams, oracle: GradientOracle, momentum: bool
) -> tuple[bool, bool]:
    """
    Close an aggregation cycle. Returns (reset_triggered, pair_stored).
    On rollback w_o, v_o and t are left as they were.
    """
    w_n = state.w_s / state.n_summed
    v_n = state.v_s / state.n_summed
    state.w_s = np.zeros_like(state.w_s)
    state.v_s = np.zeros_like(state.v_s)
    state.n_summed = 0

    pair_stored = False
    if state.t > 0:
        e_new = oracle.loss(w_n)
        e_old = oracle.loss(state.w_o)
        ensure_finite(e_new, "aggregated loss", iteration=state.k)
        ensure_finite(e_old, "previous aggregated loss", iteration=state.k)
        if e_new > hp.gamma * e_old:
            logger.debug("k=%d error control: E(w_n)=%.6g > %.4g * E(w_o)=%.6g", state.k, e_new, hp.gamma, e_old)
            state.curvature.clear()
            state.fim.clear()
            state.w = state.w_o.copy()
            state.v = state.v_o.copy()
            if momentum:
                state.mu = max(state.mu / hp.phi, hp.mu_min)
            state.resets += 1
            return True, False
        s = w_n - state.w_o
        y = fim_y(state.fim, s)
        if momentum:
            state.mu = min(state.mu * hp.phi, hp.mu_max)
        pair_stored = state.curvature.admit(s, y, hp.eps_curv, hp.min_curvature)
        state.pairs_stored += int(pair_stored)

    state.w_o = w_n
    state.v_o = v_n
    state.t += 1
    return False, pair_stored


def asnaq_step(state: AsnaqState, hp: Hyperparams, oracle: GradientOracle) -> tuple[AsnaqState, StepReport]:
    """One aSNAQ iteration on the mini-batch behind oracle. Mutates and returns state."""
    k = state.k
    loss, grad = oracle.loss_and_grad(state.w + state.mu * state.v)
    ensure_finite(loss, "loss", iteration=k)
    ensure_finite(grad, "gradient", iteration=k)

    state.accum.add(grad)
    g = two_loop_direction(grad, state.curvature, h0_diag(state.accum, hp.eps_h0))
    descent = dot(g, grad)
    norm = l2_norm(g)
    if norm > 0.0:
        g = g / norm

    w_k, v_k = state.w, state.v
    state.v = state.mu * v_k + hp.alpha * g
    state.w = w_k + state.v

    _, grad_new = oracle.loss_and_grad(state.w)
    ensure_finite(grad_new, "gradient", iteration=k)
    state.fim.push(grad_new)

    state.w_s = state.w_s + w_k
    state.v_s = state.v_s + v_k
    state.n_summed += 1

    reset = stored = aggregated = False
    if k % hp.L == 0:
        aggregated = True
        reset, stored = _aggregate(state, hp, oracle, momentum=True)
    state.k += 1
    return state, StepReport(
        loss=loss,
        direction_norm_pre=norm,
        reset_triggered=reset,
        pair_stored=stored,
        mu_after=state.mu,
        buffer_sizes=state.buffer_sizes(),
        descent=descent,
        aggregated=aggregated,
    )


def adaqn_step(state: AsnaqState, hp: Hyperparams, oracle: GradientOracle) -> tuple[AsnaqState, StepReport]:
    """
    One adaQN iteration: same cycle as aSNAQ without look-ahead, momentum or
    direction normalization. The single gradient at w_k drives the step and
    also enters the aFIM buffer.
    """
    k = state.k
    loss, grad = oracle.loss_and_grad(state.w)
    ensure_finite(loss, "loss", iteration=k)
    ensure_finite(grad, "gradient", iteration=k)

    state.accum.add(grad)
    g = two_loop_direction(grad, state.curvature, h0_diag(state.accum, hp.eps_h0))
    state.fim.push(grad)

    w_k = state.w
    state.w = w_k + hp.alpha * g
    state.w_s = state.w_s + w_k
    state.n_summed += 1

    reset = stored = aggregated = False
    if k % hp.L == 0:
        aggregated = True
        reset, stored = _aggregate(state, hp, oracle, momentum=False)
    state.k += 1
    return state, StepReport(
        loss=loss,
        direction_norm_pre=l2_norm(g),
        reset_triggered=reset,
        pair_stored=stored,
        mu_after=state.mu,
        buffer_sizes=state.buffer_sizes(),
        descent=dot(g, grad),
        aggregated=aggregated,
    )
