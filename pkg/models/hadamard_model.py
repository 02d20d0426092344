from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from utils.errors import ConfigurationError, EmptyInputError
from utils.taco_config import MAX_BLOCK_SIZE, MIN_BLOCK_SIZE


@dataclass(frozen=True)
class Block:
    values: np.ndarray
    block_index: int
    valid_length: int


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def validate_block_size(block_size: int) -> int:
    b = int(block_size)
    if not is_power_of_two(b):
        raise ConfigurationError(f"block size must be a power of two, got {block_size}")
    if not MIN_BLOCK_SIZE <= b <= MAX_BLOCK_SIZE:
        raise ConfigurationError(f"block size must be within [{MIN_BLOCK_SIZE}, {MAX_BLOCK_SIZE}], got {block_size}")
    return b


def block_matrix(x, block_size: int) -> np.ndarray:
    """
    Flat tensor -> (M, B) float32 matrix, M = ceil(N / B), tail row zero-padded.
    """
    b = validate_block_size(block_size)
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    if flat.size == 0:
        raise EmptyInputError("cannot partition an empty tensor")
    m = -(-flat.size // b)
    out = np.zeros(m * b, dtype=np.float32)
    out[: flat.size] = flat
    return out.reshape(m, b)


def valid_lengths(n: int, block_size: int) -> np.ndarray:
    m = -(-n // block_size)
    lengths = np.full(m, block_size, dtype=np.int64)
    lengths[-1] = n - (m - 1) * block_size
    return lengths


def partition(x, block_size: int) -> list[Block]:
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    rows = block_matrix(flat, block_size)
    lengths = valid_lengths(flat.size, rows.shape[1])
    return [Block(values=row, block_index=k, valid_length=int(n)) for k, (row, n) in enumerate(zip(rows, lengths))]


def join(blocks: list[Block]) -> np.ndarray:
    if not blocks:
        return np.zeros(0, dtype=np.float32)
    return np.concatenate([blk.values[: blk.valid_length] for blk in blocks]).astype(np.float32)


def _butterflies(v: np.ndarray) -> np.ndarray:
    # unnormalised Sylvester-order FWHT over the last axis, in place on a float64 scratch copy
    b = v.shape[-1]
    lead = v.shape[:-1]
    h = 1
    while h < b:
        view = v.reshape(*lead, b // (2 * h), 2, h)
        top = view[..., 0, :].copy()
        view[..., 0, :] += view[..., 1, :]
        view[..., 1, :] = top - view[..., 1, :]
        h *= 2
    return v


def fwht_orthonormal(v) -> np.ndarray:
    """
    (1/sqrt(B)) * H_B @ v along the last axis. Accepts one block or an (M, B) stack.
    """
    arr = np.asarray(v, dtype=np.float32)
    b = arr.shape[-1] if arr.ndim else 0
    if not is_power_of_two(b):
        raise ConfigurationError(f"Hadamard length must be a power of two, got {b}")
    scratch = _butterflies(arr.astype(np.float64, copy=True))
    scratch *= 1.0 / math.sqrt(b)
    return scratch.astype(np.float32)


def fwht_inverse(v) -> np.ndarray:
    # the orthonormal Sylvester matrix is symmetric and orthogonal, hence involutory
    return fwht_orthonormal(v)
