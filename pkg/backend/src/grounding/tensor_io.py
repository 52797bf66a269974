"""
Binary tensor and checkpoint files.

Tensor file ("TLG1"): magic, u32 rank, rank x u32 dims, then the float32
payload in row-major order. Checkpoint file ("TLGW"): magic, u32 tensor
count, then per tensor a u16 name length, the UTF-8 name and the same
rank/dims/payload block. Everything is little-endian.
"""

import logging
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from ..errors import FormatError, InputError

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b"TLG1"
CHECKPOINT_MAGIC = b"TLGW"
MAX_RANK = 8


def _open_for_reading(path: str | Path) -> BinaryIO:
    try:
        return open(path, "rb")
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e.strerror or e}") from e


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise FormatError(f"File ended unexpectedly while reading {what}")
    return data


def _write_block(f: BinaryIO, array: np.ndarray) -> None:
    array = np.asarray(array, dtype="<f4")
    f.write(struct.pack("<I", array.ndim))
    f.write(np.asarray(array.shape, dtype="<u4").tobytes())
    f.write(array.tobytes(order="C"))


def _read_block(f: BinaryIO) -> np.ndarray:
    (rank,) = struct.unpack("<I", _read_exact(f, 4, "tensor rank"))
    if rank > MAX_RANK:
        raise FormatError(f"Invalid tensor rank: {rank}")
    dims = np.frombuffer(_read_exact(f, 4 * rank, "tensor dims"), dtype="<u4")
    shape = tuple(int(d) for d in dims)
    count = int(np.prod(shape, dtype=np.int64))
    payload = _read_exact(f, 4 * count, "tensor payload")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        _write_block(f, array)


def read_tensor(path: str | Path) -> np.ndarray:
    with _open_for_reading(path) as f:
        if _read_exact(f, 4, "magic") != TENSOR_MAGIC:
            raise FormatError(f"{path} is not a TLG1 tensor file")
        array = _read_block(f)
        if f.read(1):
            raise FormatError(f"{path} has trailing bytes after the tensor payload")
    return array


def write_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors in dict order."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, array in tensors.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            _write_block(f, array)
    logger.info(f"Wrote checkpoint with {len(tensors)} tensors to {path}")


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Named tensors in file order."""
    tensors: dict[str, np.ndarray] = {}
    with _open_for_reading(path) as f:
        if _read_exact(f, 4, "magic") != CHECKPOINT_MAGIC:
            raise FormatError(f"{path} is not a TLGW checkpoint file")
        (count,) = struct.unpack("<I", _read_exact(f, 4, "tensor count"))
        for _ in range(count):
            (length,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            try:
                name = _read_exact(f, length, "tensor name").decode("utf-8")
            except UnicodeDecodeError as e:
                raise FormatError(f"{path}: tensor name is not UTF-8") from e
            if name in tensors:
                raise FormatError(f"{path}: duplicate tensor '{name}'")
            tensors[name] = _read_block(f)
        if f.read(1):
            raise FormatError(f"{path} has trailing bytes after {count} tensors")
    return tensors
