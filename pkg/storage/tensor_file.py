import struct
from pathlib import Path

import numpy as np

from utils.errors import TensorFileError
from utils.taco_config import TENSOR_HEADER_BYTES, TENSOR_MAGIC, TENSOR_VERSION

_HEADER = struct.Struct("<8sIQ")


def write_tensor(path, values) -> int:
    """Writes a TACOTNSR file; returns the byte count."""
    data = np.ascontiguousarray(np.ravel(values), dtype="<f4")
    blob = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, data.size) + data.tobytes()
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise TensorFileError(path, f"cannot write tensor file ({e.strerror or e})") from e
    return len(blob)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise TensorFileError(path, "tensor file not found") from None
    except OSError as e:
        raise TensorFileError(path, f"cannot read tensor file ({e.strerror or e})") from e


def read_tensor(path) -> np.ndarray:
    blob = _read_bytes(path)
    if len(blob) < TENSOR_HEADER_BYTES:
        raise TensorFileError(path, "truncated header")
    magic, version, count = _HEADER.unpack_from(blob)
    if magic != TENSOR_MAGIC:
        raise TensorFileError(path, f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    if version != TENSOR_VERSION:
        raise TensorFileError(path, f"unsupported version {version}")
    expected = TENSOR_HEADER_BYTES + 4 * count
    if len(blob) != expected:
        raise TensorFileError(path, f"file length {len(blob)} does not match header ({expected} bytes for N={count})")
    return np.frombuffer(blob, dtype="<f4", count=count, offset=TENSOR_HEADER_BYTES).astype(np.float32)


def read_raw(path) -> np.ndarray:
    """Headerless little-endian float32 dump, as written by external training frameworks."""
    blob = _read_bytes(path)
    if len(blob) % 4:
        raise TensorFileError(path, f"raw float file length {len(blob)} is not a multiple of 4")
    return np.frombuffer(blob, dtype="<f4").astype(np.float32)
