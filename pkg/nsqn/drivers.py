"""
Uniform stepping interface over every optimizer, so the experiment loop can
stay optimizer-agnostic. Mini-batch drivers get a fresh oracle per batch;
full-batch drivers (naq, bfgs) are stepped on an oracle over the whole set.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from nsqn.asnaq import AsnaqState, StepReport, adaqn_step, asnaq_step
from nsqn.config import ExperimentConfig
from nsqn.curvature import AccumGradSquares
from nsqn.dense_qn import DenseHessianApprox, naq_full_batch_step
from nsqn.first_order import AdamState, adagrad_step, adam_step, nag_lookahead, nag_step
from nsqn.numkit import GradientOracle, ParamVector, ensure_finite

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DriverStatus:
    mu: float
    n_pairs: int
    n_fim: int
    resets: int


class OptimizerDriver(ABC):
    full_batch = False

    def __init__(self, w0: ParamVector):
        self.w = w0.copy()
        self.k = 0

    def step(self, oracle: GradientOracle) -> float:
        """Advance one iteration; returns the loss seen at the evaluation point."""
        loss = self._step(oracle)
        self.k += 1
        return loss

    @abstractmethod
    def _step(self, oracle: GradientOracle) -> float: ...

    def status(self) -> DriverStatus:
        return DriverStatus(mu=0.0, n_pairs=0, n_fim=0, resets=0)

    def _grad(self, oracle: GradientOracle, at: ParamVector) -> tuple[float, ParamVector]:
        loss, grad = oracle.loss_and_grad(at)
        ensure_finite(loss, "loss", iteration=self.k)
        ensure_finite(grad, "gradient", iteration=self.k)
        return loss, grad


class AsnaqDriver(OptimizerDriver):
    def __init__(self, w0: ParamVector, cfg: ExperimentConfig):
        super().__init__(w0)
        self.hp = cfg.hp
        self.state = AsnaqState.initial(w0, cfg.hp)
        self.last_report: StepReport | None = None

    def _advance(self, oracle: GradientOracle):
        return asnaq_step(self.state, self.hp, oracle)

    def _step(self, oracle: GradientOracle) -> float:
        self.state, self.last_report = self._advance(oracle)
        self.w = self.state.w
        return self.last_report.loss

    def status(self) -> DriverStatus:
        n_pairs, n_fim = self.state.buffer_sizes()
        return DriverStatus(mu=self.state.mu, n_pairs=n_pairs, n_fim=n_fim, resets=self.state.resets)


class AdaqnDriver(AsnaqDriver):
    def _advance(self, oracle: GradientOracle):
        return adaqn_step(self.state, self.hp, oracle)


class AdamDriver(OptimizerDriver):
    def __init__(self, w0: ParamVector, cfg: ExperimentConfig):
        super().__init__(w0)
        self.hyper = cfg.adam
        self.state = AdamState.zeros(w0.shape[0])

    def _step(self, oracle: GradientOracle) -> float:
        loss, grad = self._grad(oracle, self.w)
        self.w = adam_step(self.w, self.state, grad, self.hyper)
        return loss


class AdagradDriver(OptimizerDriver):
    def __init__(self, w0: ParamVector, cfg: ExperimentConfig):
        super().__init__(w0)
        self.hyper = cfg.adagrad
        self.accum = AccumGradSquares(w0.shape[0])

    def _step(self, oracle: GradientOracle) -> float:
        loss, grad = self._grad(oracle, self.w)
        self.w = adagrad_step(self.w, self.accum, grad, self.hyper)
        return loss


class NagDriver(OptimizerDriver):
    def __init__(self, w0: ParamVector, cfg: ExperimentConfig):
        super().__init__(w0)
        self.hyper = cfg.nag
        self.velocity = np.zeros_like(w0)

    def _step(self, oracle: GradientOracle) -> float:
        loss, grad = self._grad(oracle, nag_lookahead(self.w, self.velocity, self.hyper))
        self.w, self.velocity = nag_step(self.w, self.velocity, grad, self.hyper)
        return loss

    def status(self) -> DriverStatus:
        return DriverStatus(mu=self.hyper.momentum, n_pairs=0, n_fim=0, resets=0)


class NaqDriver(OptimizerDriver):
    full_batch = True

    def __init__(self, w0: ParamVector, cfg: ExperimentConfig, momentum: bool = True):
        super().__init__(w0)
        self.mu = cfg.dense.mu if momentum else 0.0
        self.alpha = cfg.dense.alpha
        self.velocity = np.zeros_like(w0)
        self.H = DenseHessianApprox.identity(w0.shape[0])
        self.skipped = 0

    def _step(self, oracle: GradientOracle) -> float:
        result = naq_full_batch_step(self.w, self.velocity, self.H, self.mu, self.alpha, oracle)
        ensure_finite(result.w, "parameters", iteration=self.k)
        self.w, self.velocity, self.H = result.w, result.v, result.H
        self.skipped += int(not result.updated)
        return result.loss

    def status(self) -> DriverStatus:
        return DriverStatus(mu=self.mu, n_pairs=0, n_fim=0, resets=0)


class BfgsDriver(NaqDriver):
    def __init__(self, w0: ParamVector, cfg: ExperimentConfig):
        super().__init__(w0, cfg, momentum=False)


DRIVERS: dict[str, type[OptimizerDriver]] = {
    "asnaq": AsnaqDriver,
    "adaqn": AdaqnDriver,
    "adam": AdamDriver,
    "adagrad": AdagradDriver,
    "nag": NagDriver,
    "naq": NaqDriver,
    "bfgs": BfgsDriver,
}


def build_driver(cfg: ExperimentConfig, w0: ParamVector) -> OptimizerDriver:
    return DRIVERS[cfg.optimizer](w0, cfg)
