"""
TACOCMP1 archive: a fixed header followed by one record per block, each record
holding the block payload and then alpha_k and s_k, so metadata travels
contiguously with the payload it describes.
"""
import struct
from pathlib import Path

import numpy as np

from models.codec_model import FORMAT_ID_IDENTITY, FORMAT_ID_INT8, CodecKind, CompressedTensor
from models.hadamard_model import validate_block_size
from utils.errors import ConfigurationError, CorruptArchiveError, TensorFileError
from utils.taco_config import ARCHIVE_HEADER_BYTES, ARCHIVE_MAGIC

_HEADER = struct.Struct("<8sBBIQ")

_PAYLOAD_DTYPES = {
    FORMAT_ID_INT8: "i1",
    FORMAT_ID_IDENTITY: "<f4",
}


def _expected_format_ids(kind: CodecKind) -> tuple[int, ...]:
    if kind is CodecKind.IDENTITY:
        return (FORMAT_ID_IDENTITY,)
    if kind.integer_payload:
        return (FORMAT_ID_INT8,)
    return (0, 1)


def record_dtype(format_id: int, block_size: int) -> np.dtype:
    payload = _PAYLOAD_DTYPES.get(format_id, "u1")
    return np.dtype([("payload", payload, (block_size,)), ("alpha", "<f4"), ("scale", "<f4")])


def archive_size(ct: CompressedTensor) -> int:
    return ARCHIVE_HEADER_BYTES + ct.num_blocks * record_dtype(ct.format_id, ct.block_size).itemsize


def to_bytes(ct: CompressedTensor) -> bytes:
    ct.validate()
    records = np.empty(ct.num_blocks, dtype=record_dtype(ct.format_id, ct.block_size))
    records["payload"] = ct.payload
    records["alpha"] = ct.alphas
    records["scale"] = ct.scales
    header = _HEADER.pack(ARCHIVE_MAGIC, ct.codec_kind.kind_id, ct.format_id, ct.block_size, ct.original_length)
    return header + records.tobytes()


def from_bytes(blob: bytes) -> CompressedTensor:
    if len(blob) < ARCHIVE_HEADER_BYTES:
        raise CorruptArchiveError("unexpected end of archive (header)")
    magic, kind_id, format_id, block_size, length = _HEADER.unpack_from(blob)
    if magic != ARCHIVE_MAGIC:
        raise CorruptArchiveError(f"bad magic {magic!r}, expected {ARCHIVE_MAGIC!r}")
    kind = CodecKind.from_id(kind_id)
    if format_id > FORMAT_ID_IDENTITY:
        raise CorruptArchiveError(f"unknown format id {format_id}")
    if format_id not in _expected_format_ids(kind):
        raise CorruptArchiveError(f"format id {format_id} does not fit codec kind {kind.value}")
    try:
        validate_block_size(block_size)
    except ConfigurationError as e:
        raise CorruptArchiveError(str(e)) from None
    if length < 1:
        raise CorruptArchiveError("original length must be >= 1")

    dtype = record_dtype(format_id, block_size)
    blocks = -(-length // block_size)
    expected = ARCHIVE_HEADER_BYTES + blocks * dtype.itemsize
    if len(blob) < expected:
        raise CorruptArchiveError(f"unexpected end of archive ({len(blob)} of {expected} bytes)")
    if len(blob) > expected:
        raise CorruptArchiveError(f"{len(blob) - expected} trailing bytes after the last block")

    records = np.frombuffer(blob, dtype=dtype, count=blocks, offset=ARCHIVE_HEADER_BYTES)
    ct = CompressedTensor(
        codec_kind=kind,
        format_id=format_id,
        block_size=block_size,
        original_length=length,
        payload=records["payload"].copy(),
        alphas=records["alpha"].astype(np.float32),
        scales=records["scale"].astype(np.float32),
    )
    ct.validate()
    return ct


def write_archive(path, ct: CompressedTensor) -> int:
    blob = to_bytes(ct)
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise TensorFileError(path, f"cannot write archive ({e.strerror or e})") from e
    return len(blob)


def read_archive(path) -> CompressedTensor:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise TensorFileError(path, f"cannot read archive ({e.strerror or e})") from e
    return from_bytes(blob)
