"""
Benchmark tasks: binary-string counting, MNIST loading, the row-wise and
pixel-wise sequencers that turn images into input sequences, and the seeded
mini-batch plan.
"""
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from nsqn.idx_format import read_images_labels
from nsqn.numkit import DimensionError, ParameterError, SeededRng
from nsqn.rnn_model import SequenceBatch

logger = logging.getLogger(__name__)

MNIST_IMAGES_FILE = "train-images-idx3-ubyte"
MNIST_LABELS_FILE = "train-labels-idx1-ubyte"
MNIST_CLASSES = 10

_SHUFFLE_KEY = zlib.crc32(b"shuffle")


@dataclass(frozen=True)
class CountingDataset:
    sequences: NDArray[np.float64]  # [N, T, 1], entries 0.0 or 1.0
    labels: NDArray[np.int64]  # [N], ones-count in [0, T]

    @property
    def T(self) -> int:
        return self.sequences.shape[1]

    @property
    def n_classes(self) -> int:
        return self.T + 1

    def as_batch(self) -> SequenceBatch:
        return SequenceBatch(self.sequences, self.labels)


def gen_counting(n: int, T: int, rng: SeededRng) -> CountingDataset:
    """n binary strings of length T with fair bits, labelled by their number of ones."""
    if n < 1 or T < 1:
        raise ParameterError(f"counting task needs n >= 1 and T >= 1, got n={n}, T={T}")
    bits = rng.generator.integers(0, 2, size=(n, T))
    return CountingDataset(
        sequences=bits.astype(np.float64)[:, :, None],
        labels=bits.sum(axis=1).astype(np.int64),
    )


@dataclass(frozen=True)
class MnistDataset:
    images: NDArray[np.float64]  # [N, H, W] in [0, 1]
    labels: NDArray[np.int64]  # [N], digits 0-9

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DimensionError(f"images must be [N, H, W], got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise DimensionError(f"{self.labels.shape[0]} labels for {self.images.shape[0]} images")

    @property
    def size(self) -> int:
        return self.images.shape[0]

    def head(self, n: int) -> "MnistDataset":
        """First n samples (all of them if n exceeds the size)."""
        return MnistDataset(self.images[:n], self.labels[:n])


def load_mnist_idx(images_path: str | Path, labels_path: str | Path) -> MnistDataset:
    images, labels = read_images_labels(images_path, labels_path)
    logger.info("loaded MNIST: %d images of %dx%d from %s", images.shape[0], images.shape[1], images.shape[2], images_path)
    return MnistDataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def resolve_mnist_paths(data_dir: str | Path) -> tuple[Path, Path]:
    """Training-set file paths under data_dir, preferring uncompressed files over .gz."""
    root = Path(data_dir)
    found = []
    for name in (MNIST_IMAGES_FILE, MNIST_LABELS_FILE):
        plain, packed = root / name, root / f"{name}.gz"
        if plain.is_file():
            found.append(plain)
        elif packed.is_file():
            found.append(packed)
        else:
            raise FileNotFoundError(f"neither {plain} nor {packed} exists")
    return found[0], found[1]


def row_sequencer(dataset: MnistDataset) -> SequenceBatch:
    """One image row per time step: T = H, n_in = W."""
    return SequenceBatch(np.ascontiguousarray(dataset.images), dataset.labels)


def pixel_sequencer(dataset: MnistDataset, downsample: int | None = None) -> SequenceBatch:
    """
    One pixel per time step in scanline order: T = side^2, n_in = 1.
    With downsample, each output pixel is the mean of an evenly sized block.
    """
    images = dataset.images
    n, h, w = images.shape
    if downsample is not None:
        if downsample < 1 or h % downsample or w % downsample:
            raise ParameterError(f"downsample side {downsample} must divide the {h}x{w} image evenly")
        fh, fw = h // downsample, w // downsample
        images = images.reshape(n, downsample, fh, downsample, fw).mean(axis=(2, 4))
    return SequenceBatch(images.reshape(n, -1, 1), dataset.labels)


@dataclass(frozen=True)
class BatchPlan:
    order: NDArray[np.int64]
    b: int
    drop_last: bool = True

    @property
    def n_batches(self) -> int:
        full, rest = divmod(len(self.order), self.b)
        return full if self.drop_last or rest == 0 else full + 1

    def __iter__(self) -> Iterator[NDArray[np.int64]]:
        for i in range(self.n_batches):
            yield self.order[i * self.b:(i + 1) * self.b]


def minibatches(N: int, b: int, seed: int, epoch: int) -> BatchPlan:
    """Shuffled batches of exactly b samples; the order depends only on (seed, epoch)."""
    if b < 1 or b > N:
        raise ParameterError(f"batch size must lie in [1, {N}], got {b}")
    seq = np.random.SeedSequence(seed, spawn_key=(_SHUFFLE_KEY, epoch))
    order = np.random.Generator(np.random.PCG64(seq)).permutation(N)
    return BatchPlan(order=order, b=b)
