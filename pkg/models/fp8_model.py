"""
Bit-exact software emulation of the 8-bit floating point formats E4M3 and E5M2.

Every format owns a 256-entry decode table built by direct bit interpretation.
Encoding searches the sorted non-negative finite half of that table and rounds
to nearest, ties to the even code, so the table is the single source of truth
for both directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from utils.errors import ConfigurationError


class Fp8Variant(str, Enum):
    E4M3 = "e4m3"
    E5M2 = "e5m2"


@dataclass(frozen=True)
class Fp8Format:
    variant: Fp8Variant
    exponent_bits: int
    mantissa_bits: int
    bias: int
    has_infinity: bool
    format_id: int = field(compare=False)

    def __post_init__(self):
        if self.exponent_bits + self.mantissa_bits + 1 != 8:
            raise ConfigurationError(f"{self.variant.value}: exponent + mantissa + sign must be 8 bits")

    @cached_property
    def decode_table(self) -> np.ndarray:
        codes = np.arange(256, dtype=np.int64)
        sign = np.where(codes >> 7, -1.0, 1.0)
        exp = (codes >> self.mantissa_bits) & ((1 << self.exponent_bits) - 1)
        frac = (codes & ((1 << self.mantissa_bits) - 1)).astype(np.float64) / (1 << self.mantissa_bits)

        normal = np.ldexp(1.0 + frac, (exp - self.bias).astype(np.int32))
        subnormal = np.ldexp(frac, 1 - self.bias)
        table = sign * np.where(exp == 0, subnormal, normal)

        top_exp = exp == (1 << self.exponent_bits) - 1
        if self.has_infinity:
            table[top_exp & (frac == 0)] = sign[top_exp & (frac == 0)] * np.inf
            table[top_exp & (frac != 0)] = np.nan
        else:
            # only S.1111.111 is NaN, the rest of the top binade is finite
            table[top_exp & (frac == 1.0 - 1.0 / (1 << self.mantissa_bits))] = np.nan
        table.setflags(write=False)
        return table

    @cached_property
    def max_code(self) -> int:
        """Largest positive finite code; codes 0..max_code increase monotonically."""
        finite = np.flatnonzero(np.isfinite(self.decode_table[:128]))
        return int(finite[-1])

    @cached_property
    def positive_grid(self) -> np.ndarray:
        return self.decode_table[: self.max_code + 1]

    @property
    def q_max(self) -> float:
        return float(self.decode_table[self.max_code])

    @property
    def min_normal(self) -> float:
        return float(np.ldexp(1.0, 1 - self.bias))

    @property
    def subnormal_spacing(self) -> float:
        return float(np.ldexp(1.0, 1 - self.bias - self.mantissa_bits))

    @property
    def nan_code(self) -> int:
        return 0x7E if self.has_infinity else 0x7F

    @property
    def inf_code(self) -> int | None:
        return 0x7C if self.has_infinity else None

    @property
    def overflow_threshold(self) -> float:
        # RNE boundary between q_max and the next (unrepresentable) step
        return self.q_max + fp8_ulp(self.q_max, self) / 2.0


E4M3 = Fp8Format(Fp8Variant.E4M3, exponent_bits=4, mantissa_bits=3, bias=7, has_infinity=False, format_id=0)
E5M2 = Fp8Format(Fp8Variant.E5M2, exponent_bits=5, mantissa_bits=2, bias=15, has_infinity=True, format_id=1)

FORMATS = {fmt.variant.value: fmt for fmt in (E4M3, E5M2)}


def get_format(name: str | Fp8Variant | Fp8Format) -> Fp8Format:
    if isinstance(name, Fp8Format):
        return name
    key = name.value if isinstance(name, Fp8Variant) else str(name).lower()
    try:
        return FORMATS[key]
    except KeyError:
        raise ConfigurationError(f"Unknown FP8 format: {name} (expected one of {sorted(FORMATS)})") from None


def encode(values, fmt: Fp8Format, saturate: bool = True) -> np.ndarray:
    """Vectorised float32 -> FP8 codes (uint8), RNE with ties to the even code."""
    x = np.asarray(values, dtype=np.float32)
    mag = np.abs(x.astype(np.float64))
    grid = fmt.positive_grid
    last = grid.size - 1

    idx = np.searchsorted(grid, mag, side="left")
    hi = np.minimum(idx, last)
    lo = np.clip(idx - 1, 0, last)
    d_hi = grid[hi] - mag
    d_lo = mag - grid[lo]
    take_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (hi % 2 == 0))
    codes = np.where(take_hi, hi, lo).astype(np.uint8)

    # saturation falls out of the grid search: |x| > q_max picks max_code
    if fmt.has_infinity and not saturate:
        codes = np.where(mag >= fmt.overflow_threshold, np.uint8(fmt.inf_code), codes)

    codes = codes | (np.signbit(x).astype(np.uint8) << 7)
    codes = np.where(np.isnan(x), np.uint8(fmt.nan_code), codes).astype(np.uint8)
    return codes


def decode(codes, fmt: Fp8Format) -> np.ndarray:
    return fmt.decode_table[np.asarray(codes, dtype=np.uint8)].astype(np.float32)


def ulp(values, fmt: Fp8Format) -> np.ndarray:
    """Spacing of representable values at |x|; subnormal spacing below the normal range."""
    mag = np.abs(np.asarray(values, dtype=np.float64))
    _, exp = np.frexp(mag)
    spacing = np.ldexp(1.0, exp - 1 - fmt.mantissa_bits)
    return np.where(mag < fmt.min_normal, fmt.subnormal_spacing, spacing).astype(np.float32)


def fp8_encode(x: float, fmt: Fp8Format, saturate: bool = True) -> int:
    return int(encode(np.float32(x), fmt, saturate=saturate))


def fp8_decode(code: int, fmt: Fp8Format) -> float:
    return float(np.float32(fmt.decode_table[code & 0xFF]))


def fp8_ulp(x: float, fmt: Fp8Format) -> float:
    return float(ulp(x, fmt))


def relative_error_bound(fmt: Fp8Format) -> float:
    half = 2.0 ** -(fmt.mantissa_bits + 1)
    return half / (1.0 - half)
