"""
Verification suites behind the grad-check and oracle-check commands.

grad-check compares BPTT against central differences over a grid of sequence
lengths. oracle-check compares the limited-memory machinery with explicit
dense computations: the two-loop recursion against repeated dense BFGS updates,
the aFIM product against the explicit outer-product matrix, and the dense
update against the secant condition.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from nsqn.curvature import CurvatureBuffer, FimBuffer, fim_y, two_loop_direction
from nsqn.dense_qn import DenseHessianApprox, dense_bfgs_update
from nsqn.numkit import ParamVector, SeededRng
from nsqn.rnn_model import RnnSpec, SequenceBatch, backward, grad_check

logger = logging.getLogger(__name__)

GRAD_CHECK_LENGTHS = (1, 5, 20, 50)
GRAD_CHECK_TOLERANCE = 1e-4
ORACLE_TOLERANCE = 1e-9

GradientFn = Callable[[ParamVector, RnnSpec, SequenceBatch], tuple[float, ParamVector]]


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    trials: int = 1

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "trials": self.trials,
            "passed": self.passed,
        }


def corrupted_backward(params: ParamVector, spec: RnnSpec, batch: SequenceBatch) -> tuple[float, ParamVector]:
    """backward() with its first component knocked off; used to prove grad-check can fail."""
    loss, grad = backward(params, spec, batch)
    grad = grad.copy()
    grad[0] += 1e-2
    return loss, grad


def run_grad_check(
    seed: int = 0,
    lengths: tuple[int, ...] = GRAD_CHECK_LENGTHS,
    gradient_fn: GradientFn = backward,
    batch_size: int = 4,
) -> list[CheckResult]:
    rng = SeededRng(seed).spawn("grad-check")
    results = []
    for T in lengths:
        spec = RnnSpec(n_in=3, n_hidden=5, n_out=4, T=T)
        inputs = rng.generator.standard_normal((batch_size, T, spec.n_in))
        targets = rng.generator.integers(0, spec.n_out, size=batch_size)
        err = grad_check(spec, SequenceBatch(inputs, targets), rng, gradient_fn=gradient_fn)
        results.append(CheckResult(f"T={T}", err, GRAD_CHECK_TOLERANCE))
        logger.info("grad-check T=%d: max relative error %.3e", T, err)
    return results


def _relative(diff: ParamVector, ref: ParamVector) -> float:
    return float(np.linalg.norm(diff) / max(np.linalg.norm(ref), 1e-300))


def _admissible_pair(rng: np.random.Generator, d: int) -> tuple[ParamVector, ParamVector]:
    """(s, A s) with A symmetric positive definite and well conditioned."""
    s = rng.standard_normal(d)
    B = rng.standard_normal((d, d))
    A = np.eye(d) + B @ B.T / d
    return s, A @ s


def check_worked_example() -> CheckResult:
    """One pair s=(1,0), y=(2,0), h0=1: the direction for grad (1,1) is (-0.5, -1)."""
    buf = CurvatureBuffer(5)
    buf.admit(np.array([1.0, 0.0]), np.array([2.0, 0.0]), 1e-8)
    g = two_loop_direction(np.array([1.0, 1.0]), buf, np.ones(2))
    return CheckResult("worked-example", float(np.abs(g - np.array([-0.5, -1.0])).max()), ORACLE_TOLERANCE)


def check_two_loop(rng: np.random.Generator, trials: int = 100) -> CheckResult:
    """Trial 0 always uses an empty buffer, where the direction must be exactly -h0 * grad."""
    worst = 0.0
    for trial in range(trials):
        d = int(rng.integers(2, 11))
        m = 0 if trial == 0 else int(rng.integers(1, 6))
        h0 = rng.uniform(0.5, 2.0, size=d)
        grad = rng.standard_normal(d)
        buf = CurvatureBuffer(5)
        H = DenseHessianApprox.from_diagonal(h0)
        for _ in range(m):
            s, y = _admissible_pair(rng, d)
            if buf.admit(s, y, 1e-8):
                H = dense_bfgs_update(H, s, y)
        expected = -H.apply(grad)
        got = two_loop_direction(grad, buf, h0)
        if m == 0:
            worst = max(worst, float(np.abs(got - (-h0 * grad)).max()))
        worst = max(worst, _relative(got - expected, expected))
    return CheckResult("two-loop-vs-dense", worst, ORACLE_TOLERANCE, trials)


def check_fim(rng: np.random.Generator, trials: int = 100) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        n = int(rng.integers(1, 11))
        fim = FimBuffer(10)
        grads = rng.standard_normal((n, d))
        for g in grads:
            fim.push(g)
        s = rng.standard_normal(d)
        explicit = sum(np.outer(g, g) for g in grads) / n
        expected = explicit @ s
        worst = max(worst, _relative(fim_y(fim, s) - expected, expected))
    return CheckResult("fim-vs-dense", worst, ORACLE_TOLERANCE, trials)


def check_secant(rng: np.random.Generator, trials: int = 100) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 11))
        B = rng.standard_normal((d, d))
        H = DenseHessianApprox(np.eye(d) + B @ B.T / d)
        s, y = _admissible_pair(rng, d)
        updated = dense_bfgs_update(H, s, y)
        worst = max(worst, _relative(updated.apply(y) - s, s))
    return CheckResult("secant", worst, ORACLE_TOLERANCE, trials)


def run_oracle_check(seed: int = 0, trials: int = 100) -> list[CheckResult]:
    rng = SeededRng(seed).spawn("oracle-check").generator
    results = [
        check_worked_example(),
        check_two_loop(rng, trials),
        check_fim(rng, trials),
        check_secant(rng, trials),
    ]
    for r in results:
        logger.info("oracle-check %s: max deviation %.3e over %d trials", r.name, r.max_error, r.trials)
    return results


def all_passed(results: list[CheckResult]) -> bool:
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("checks failed: %s", ", ".join(failed))
    return not failed
