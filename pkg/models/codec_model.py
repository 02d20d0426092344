"""
TACO block codec: adaptive rescale -> orthonormal Hadamard -> dual-scale FP8,
reconstructed strictly in reverse order. Baseline and ablation codecs share the
same block layout so every kind can be stored in the same archive format.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from config import config
from models.fp8_model import E4M3, E5M2, Fp8Format, decode, encode, get_format
from models.hadamard_model import block_matrix, fwht_inverse, fwht_orthonormal, validate_block_size
from utils.errors import ConfigurationError, CorruptArchiveError, EmptyInputError, InputValidationError
from utils.taco_config import BLOCK_METADATA_BYTES

INT8_LEVELS = 127
FORMAT_ID_INT8 = 2
FORMAT_ID_IDENTITY = 3


class CodecKind(str, Enum):
    TACO = "taco"
    DIRECT_FP8 = "fp8"
    DIRECT_FP8_BLOCK = "fp8-block"
    INT8_UNIFORM = "int8"
    IDENTITY = "identity"
    HADAMARD = "hadamard"
    ASH_INT8 = "ash-int8"

    @property
    def kind_id(self) -> int:
        return _KIND_IDS[self]

    @classmethod
    def from_id(cls, kind_id: int) -> "CodecKind":
        for kind, ident in _KIND_IDS.items():
            if ident == kind_id:
                return kind
        raise CorruptArchiveError(f"unknown codec kind id {kind_id}")

    @property
    def rotates(self) -> bool:
        return self in (CodecKind.TACO, CodecKind.HADAMARD, CodecKind.ASH_INT8)

    @property
    def adaptive(self) -> bool:
        return self in (CodecKind.TACO, CodecKind.ASH_INT8)

    @property
    def integer_payload(self) -> bool:
        return self in (CodecKind.INT8_UNIFORM, CodecKind.ASH_INT8)

    @property
    def block_local(self) -> bool:
        """True when no scale is shared across blocks, so any block-aligned split compresses identically."""
        return self not in (CodecKind.DIRECT_FP8, CodecKind.INT8_UNIFORM, CodecKind.HADAMARD)


_KIND_IDS = {
    CodecKind.TACO: 0,
    CodecKind.DIRECT_FP8: 1,
    CodecKind.DIRECT_FP8_BLOCK: 2,
    CodecKind.INT8_UNIFORM: 3,
    CodecKind.IDENTITY: 4,
    CodecKind.HADAMARD: 5,
    CodecKind.ASH_INT8: 6,
}


@dataclass(frozen=True)
class CodecConfig:
    block_size: int = 256
    target_energy: float = 1.0
    stability_epsilon: float = 1e-12
    format: Fp8Format = E4M3
    codec_kind: CodecKind = CodecKind.TACO
    saturate: bool = True

    def __post_init__(self):
        validate_block_size(self.block_size)
        if not self.target_energy > 0:
            raise ConfigurationError(f"target energy tau must be > 0, got {self.target_energy}")
        if not self.stability_epsilon > 0:
            raise ConfigurationError(f"stability epsilon must be > 0, got {self.stability_epsilon}")
        object.__setattr__(self, "format", get_format(self.format))
        object.__setattr__(self, "codec_kind", CodecKind(self.codec_kind))

    @classmethod
    def from_env(cls, **overrides) -> "CodecConfig":
        params = {
            "block_size": config.TACO_BLOCK_SIZE,
            "target_energy": config.TACO_TARGET_ENERGY,
            "stability_epsilon": config.TACO_EPSILON,
            "format": config.TACO_FORMAT,
        }
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**params)

    def with_kind(self, kind: CodecKind | str) -> "CodecConfig":
        return replace(self, codec_kind=CodecKind(kind))

    @property
    def format_id(self) -> int:
        if self.codec_kind is CodecKind.IDENTITY:
            return FORMAT_ID_IDENTITY
        if self.codec_kind.integer_payload:
            return FORMAT_ID_INT8
        return self.format.format_id

    @property
    def label(self) -> str:
        if self.codec_kind is CodecKind.IDENTITY or self.codec_kind.integer_payload:
            return self.codec_kind.value
        return f"{self.codec_kind.value}-{self.format.variant.value}"


@dataclass(frozen=True)
class CompressedBlock:
    payload: np.ndarray
    alpha: float
    scale: float


@dataclass
class CompressedTensor:
    codec_kind: CodecKind
    format_id: int
    block_size: int
    original_length: int
    payload: np.ndarray  # (M, B): uint8 codes, int8 levels, or float32 for identity
    alphas: np.ndarray = field(repr=False)
    scales: np.ndarray = field(repr=False)

    @property
    def num_blocks(self) -> int:
        return int(self.payload.shape[0])

    @property
    def nbytes(self) -> int:
        """Payload plus per-block metadata, as carried on the wire."""
        return int(self.payload.nbytes) + BLOCK_METADATA_BYTES * self.num_blocks

    @property
    def blocks(self) -> list[CompressedBlock]:
        return [
            CompressedBlock(payload=row, alpha=float(a), scale=float(s))
            for row, a, s in zip(self.payload, self.alphas, self.scales)
        ]

    def validate(self) -> None:
        expected = -(-self.original_length // self.block_size)
        if self.original_length < 1 or self.num_blocks != expected:
            raise CorruptArchiveError(
                f"original length {self.original_length} needs {expected} blocks of {self.block_size}, "
                f"found {self.num_blocks}"
            )
        if self.payload.shape[1:] != (self.block_size,):
            raise CorruptArchiveError(f"payload rows must hold {self.block_size} elements")
        if not (np.all(np.isfinite(self.alphas)) and np.all(self.alphas > 0)):
            raise CorruptArchiveError("alpha_k must be finite and > 0")
        if not (np.all(np.isfinite(self.scales)) and np.all(self.scales > 0)):
            raise CorruptArchiveError("s_k must be finite and > 0")


def block_rms(g, epsilon: float) -> float:
    """sigma_k = sqrt(mean(g^2) + eps) over all B slots, pad zeros included."""
    return float(_rms_rows(np.asarray(g, dtype=np.float32).reshape(1, -1), epsilon)[0])


def adaptive_scale(sigma: float, target_energy: float) -> float:
    return float(_alphas(np.array([sigma], dtype=np.float64), target_energy)[0])


def _rms_rows(rows: np.ndarray, epsilon: float) -> np.ndarray:
    # float64 energy: squares and block sums of large finite inputs overflow float32
    wide = rows.astype(np.float64)
    return np.sqrt(np.mean(wide * wide, axis=1) + epsilon).astype(np.float32)


def _alphas(sigma: np.ndarray, target_energy: float) -> np.ndarray:
    return (np.float64(target_energy) / sigma.astype(np.float64)).astype(np.float32)


def _max_scale(z: np.ndarray, top: float, per_block: bool) -> np.ndarray:
    peak = np.max(np.abs(z), axis=1) if per_block else np.full(z.shape[0], np.max(np.abs(z)), dtype=np.float32)
    scales = (peak / np.float32(top)).astype(np.float32)
    # all-zero blocks keep s_k = 1 so reconstruction stays an exact zero
    return np.where(peak == 0, np.float32(1.0), scales).astype(np.float32)


def _checked_rows(x, cfg: CodecConfig) -> tuple[np.ndarray, int]:
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    if flat.size == 0:
        raise EmptyInputError("cannot compress an empty tensor")
    if not np.all(np.isfinite(flat)):
        bad = int(np.count_nonzero(~np.isfinite(flat)))
        raise InputValidationError(f"input holds {bad} non-finite values (NaN/Inf)")
    return block_matrix(flat, cfg.block_size), flat.size


def _forward(rows: np.ndarray, cfg: CodecConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (alphas, scales, values handed to the element quantiser)."""
    kind = cfg.codec_kind
    m = rows.shape[0]
    alphas = np.ones(m, dtype=np.float32)

    if kind is CodecKind.IDENTITY:
        return alphas, np.ones(m, dtype=np.float32), rows

    if kind.adaptive:
        sigma = _rms_rows(rows, cfg.stability_epsilon)
        alphas = _alphas(sigma, cfg.target_energy)
        rows = rows * alphas[:, None]
    z = fwht_orthonormal(rows) if kind.rotates else rows

    top = INT8_LEVELS if kind.integer_payload else cfg.format.q_max
    per_block = kind in (CodecKind.TACO, CodecKind.DIRECT_FP8_BLOCK, CodecKind.ASH_INT8)
    scales = _max_scale(z, top, per_block)
    return alphas, scales, (z / scales[:, None]).astype(np.float32)


def quantiser_inputs(x, cfg: CodecConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alphas, scales, (M, B) values presented to the element quantiser)."""
    rows, _ = _checked_rows(x, cfg)
    return _forward(rows, cfg)


def scaled_values(x, cfg: CodecConfig) -> np.ndarray:
    """Pre-quantisation view, e.g. Z_k / s_k for TACO."""
    return quantiser_inputs(x, cfg)[2]


def compress(x, cfg: CodecConfig) -> CompressedTensor:
    rows, n = _checked_rows(x, cfg)
    alphas, scales, q = _forward(rows, cfg)

    if cfg.codec_kind is CodecKind.IDENTITY:
        payload = q.copy()
    elif cfg.codec_kind.integer_payload:
        payload = np.clip(np.rint(q), -INT8_LEVELS, INT8_LEVELS).astype(np.int8)
    else:
        payload = encode(q, cfg.format, saturate=cfg.saturate)

    return CompressedTensor(
        codec_kind=cfg.codec_kind,
        format_id=cfg.format_id,
        block_size=cfg.block_size,
        original_length=n,
        payload=payload,
        alphas=alphas,
        scales=scales,
    )


def payload_format(ct: CompressedTensor) -> Fp8Format | None:
    if ct.format_id in (FORMAT_ID_INT8, FORMAT_ID_IDENTITY):
        return None
    fmt = {E4M3.format_id: E4M3, E5M2.format_id: E5M2}.get(ct.format_id)
    if fmt is None:
        raise CorruptArchiveError(f"unknown format id {ct.format_id}")
    return fmt


def decompress(ct: CompressedTensor, cfg: CodecConfig | None = None) -> np.ndarray:
    if cfg is not None and (cfg.codec_kind is not ct.codec_kind or cfg.block_size != ct.block_size):
        raise ConfigurationError(
            f"tensor was compressed as {ct.codec_kind.value}/B={ct.block_size}, "
            f"not {cfg.codec_kind.value}/B={cfg.block_size}"
        )
    ct.validate()
    kind = ct.codec_kind

    if kind is CodecKind.IDENTITY:
        return np.asarray(ct.payload, dtype=np.float32).reshape(-1)[: ct.original_length].copy()

    if kind.integer_payload:
        levels = ct.payload.astype(np.float32)
    else:
        levels = decode(ct.payload, payload_format(ct))
    z_hat = levels * ct.scales[:, None]  # dequantise
    g_hat = fwht_inverse(z_hat) if kind.rotates else z_hat  # inverse rotation
    restored = g_hat / ct.alphas[:, None]  # undo adaptive rescale
    return restored.astype(np.float32).reshape(-1)[: ct.original_length]


def compressed_ratio(cfg: CodecConfig, n: int) -> float:
    if n < 1:
        raise ConfigurationError(f"element count must be >= 1, got {n}")
    if cfg.codec_kind is CodecKind.IDENTITY:
        return 1.0
    blocks = -(-n // cfg.block_size)
    return 4.0 * n / (blocks * (cfg.block_size + BLOCK_METADATA_BYTES))


def round_trip(x, cfg: CodecConfig) -> np.ndarray:
    return decompress(compress(x, cfg), cfg)
