"""
Flat-vector algebra and seeded randomness shared by the model, optimizers and tasks.

A ParamVector is a 1-d float64 numpy array. Normal draws come from numpy's
PCG64 generator (ziggurat transform over its uniform stream), so a given seed
reproduces bit-exactly on any platform numpy supports.
"""
import zlib
from typing import Protocol, TypeAlias

import numpy as np
from numpy.typing import NDArray


ParamVector: TypeAlias = NDArray[np.float64]


class DimensionError(ValueError):
    """Raised when vectors or arrays exchanged between components disagree in shape."""
    pass


class ParameterError(ValueError):
    """Raised when a scalar argument is outside its allowed range."""
    pass


class NumericError(ArithmeticError):
    """Raised when a loss, gradient or intermediate becomes NaN or infinite."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration


class SeededRng:
    """Single-owner random source. Named sub-streams are derived from the master seed."""

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, name: str) -> "SeededRng":
        """Independent stream keyed by name; same (seed, name) always yields the same stream."""
        child = SeededRng.__new__(SeededRng)
        child.seed = self.seed
        child._seq = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
        child.generator = np.random.Generator(np.random.PCG64(child._seq))
        return child


class GradientOracle(Protocol):
    """Loss and gradient of E(w) over one fixed set of samples."""

    def loss(self, w: ParamVector) -> float: ...

    def loss_and_grad(self, w: ParamVector) -> tuple[float, ParamVector]: ...


def as_vector(values) -> ParamVector:
    """Copy values into a contiguous 1-d float64 array."""
    return np.array(values, dtype=np.float64).reshape(-1)


def _check_same_length(a: ParamVector, b: ParamVector) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")


def ensure_finite(x, what: str, iteration: int | None = None) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite {what}", iteration=iteration)


def dot(a: ParamVector, b: ParamVector) -> float:
    _check_same_length(a, b)
    return float(np.dot(a, b))


def axpy(c: float, x: ParamVector, y: ParamVector) -> ParamVector:
    """Return y + c*x as a new vector."""
    _check_same_length(x, y)
    return y + c * x


def l2_norm(x: ParamVector) -> float:
    return float(np.linalg.norm(x))


def sample_normal(rng: SeededRng, mean: float, std: float, n: int) -> ParamVector:
    """n i.i.d. N(mean, std^2) draws; advances rng."""
    if std < 0:
        raise ParameterError(f"std must be >= 0, got {std}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return mean + std * rng.generator.standard_normal(n)
