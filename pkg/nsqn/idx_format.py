"""
Reader and writer for the big-endian IDX format used by the MNIST distribution.

Header: two zero bytes, a type code (0x08 = unsigned byte), the number of
dimensions, then one uint32 per dimension; the payload follows row-major.
gzip-compressed files are detected by their magic bytes and read transparently.
"""
import gzip
import logging
import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
UBYTE_TYPE = 0x08

GZIP_HEADER = bytes([0x1F, 0x8B])


class IdxFormatError(ValueError):
    """Raised when a file does not carry the expected IDX magic number."""
    pass


class IdxConsistencyError(ValueError):
    """Raised when an images file and a labels file disagree on the sample count."""
    pass


class IdxTruncatedError(OSError):
    """Raised when an IDX file ends before its header or payload is complete."""
    pass


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == GZIP_HEADER:
        try:
            return gzip.decompress(raw)
        except EOFError as e:
            raise IdxTruncatedError(f"{path}: truncated gzip stream") from e
    return raw


def read_idx(path: str | Path, expected_magic: int) -> NDArray[np.uint8]:
    """Parse one unsigned-byte IDX file and return its payload with the header's shape."""
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX header ({len(raw)} bytes)")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")

    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxTruncatedError(f"{path}: header needs {header_len} bytes, file has {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    n_bytes = int(np.prod(dims))
    payload = raw[header_len:header_len + n_bytes]
    if len(payload) < n_bytes:
        raise IdxTruncatedError(f"{path}: payload has {len(payload)} of {n_bytes} bytes")
    logger.debug("read %s: dims=%s", path, dims)
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx(path: str | Path, data: NDArray, compress: bool | None = None) -> None:
    """
    Write data as an unsigned-byte IDX file. Compression defaults to the path
    suffix (.gz); values must already fit in a byte.
    """
    path = Path(path)
    arr = np.asarray(data)
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError(f"IDX supports 1-255 dimensions, got {arr.ndim}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("IDX unsigned-byte payload must lie in [0, 255]")
    header = struct.pack(">BBBB", 0, 0, UBYTE_TYPE, arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    blob = header + arr.astype(np.uint8).tobytes(order="C")
    if compress is None:
        compress = path.suffix == ".gz"
    path.write_bytes(gzip.compress(blob, mtime=0) if compress else blob)


def read_images_labels(images_path: str | Path, labels_path: str | Path) -> tuple[NDArray, NDArray]:
    """Raw uint8 images [N, H, W] and labels [N], with the sample counts cross-checked."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxConsistencyError(
            f"{images_path} holds {images.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        )
    return images, labels
