from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from config import config
from models.codec_model import CodecConfig, CodecKind, compressed_ratio, quantiser_inputs, round_trip, scaled_values
from models.fp8_model import Fp8Format, ulp
from models.hadamard_model import block_matrix, validate_block_size
from utils.errors import ConfigurationError, LengthMismatchError
from utils.taco_config import DEFAULT_BINS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    relative_l2: float
    max_abs_error: float
    zero_collapse_fraction: float
    histogram: Histogram
    kurtosis: float
    dense_mse: float = math.nan
    relative_l2_flagged: bool = False


@dataclass(frozen=True)
class DistributionStats:
    histogram: Histogram
    kurtosis: float
    kurtosis_defined: bool
    fractions_within: dict[float, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CodecComparison:
    config: CodecConfig
    report: ErrorReport
    ratio: float
    prequant_kurtosis: float = math.nan
    underflow_fraction: float = math.nan
    prequant_histogram: Histogram | None = None

    @property
    def label(self) -> str:
        return self.config.label


@dataclass(frozen=True)
class SweepRow:
    block_size: int
    report: ErrorReport
    ratio: float


def _as_f64(x) -> np.ndarray:
    return np.ravel(np.asarray(x, dtype=np.float32)).astype(np.float64)


def histogram(values, bins: int = DEFAULT_BINS) -> Histogram:
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(_as_f64(values), bins=bins)
    return Histogram(bin_edges=edges, counts=counts.astype(np.int64))


def excess_kurtosis(values) -> float:
    """Fisher excess kurtosis (biased fourth-moment estimator); NaN when the input is constant."""
    v = _as_f64(values)
    if v.size < 2 or np.all(v == v[0]):
        return math.nan
    return float(stats.kurtosis(v, fisher=True, bias=True))


def error_report(original, reconstructed, bins: int = DEFAULT_BINS, dense_threshold: float | None = None) -> ErrorReport:
    x = _as_f64(original)
    x_hat = _as_f64(reconstructed)
    if x.size != x_hat.size:
        raise LengthMismatchError(f"original has {x.size} elements, reconstruction has {x_hat.size}")

    e = x - x_hat
    err_norm = float(np.linalg.norm(e))
    ref_norm = float(np.linalg.norm(x))
    flagged = False
    if ref_norm > 0:
        rel = err_norm / ref_norm
    elif err_norm == 0:
        rel = 0.0
    else:
        rel, flagged = math.inf, True

    nonzero = x != 0
    collapsed = np.count_nonzero(nonzero & (x_hat == 0))
    n_nonzero = np.count_nonzero(nonzero)

    dense_mse = math.nan
    if dense_threshold is not None:
        dense = np.abs(x) <= dense_threshold
        dense_mse = float(np.mean(e[dense] ** 2)) if dense.any() else math.nan

    return ErrorReport(
        mse=float(np.mean(e ** 2)) if e.size else 0.0,
        relative_l2=rel,
        max_abs_error=float(np.max(np.abs(e))) if e.size else 0.0,
        zero_collapse_fraction=collapsed / n_nonzero if n_nonzero else 0.0,
        histogram=histogram(e, bins),
        kurtosis=excess_kurtosis(e),
        dense_mse=dense_mse,
        relative_l2_flagged=flagged,
    )


def fraction_within(values, threshold: float) -> float:
    v = _as_f64(values)
    return float(np.count_nonzero(np.abs(v) <= threshold) / v.size) if v.size else 0.0


def distribution_stats(values, bins: int = DEFAULT_BINS, thresholds=()) -> DistributionStats:
    v = _as_f64(values)
    if v.size < 2:
        raise ConfigurationError("distribution statistics need at least two values")
    kurt = excess_kurtosis(v)
    return DistributionStats(
        histogram=histogram(v, bins),
        kurtosis=kurt,
        kurtosis_defined=not math.isnan(kurt),
        fractions_within={float(t): fraction_within(v, t) for t in thresholds},
    )


def underflow_fraction(values, fmt: Fp8Format) -> float:
    """Share of nonzero quantiser inputs below the smallest normal, i.e. wasted FP8 range."""
    v = np.abs(_as_f64(values))
    nonzero = v > 0
    if not nonzero.any():
        return 0.0
    return float(np.count_nonzero(nonzero & (v < fmt.min_normal)) / np.count_nonzero(nonzero))


def ulp_violations(x, cfg: CodecConfig) -> int:
    """
    Elements breaking |e_i| <= s_k * ulp(Z_i / s_k) / 2 + slack for a direct FP8 codec.
    Slack covers float32 rounding of the scale multiply and divide.
    """
    if cfg.codec_kind not in (CodecKind.DIRECT_FP8, CodecKind.DIRECT_FP8_BLOCK):
        raise ConfigurationError("ULP consistency is defined for direct FP8 codecs only")
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    _, scales, values = quantiser_inputs(flat, cfg)
    original = block_matrix(flat, cfg.block_size).astype(np.float64)
    restored = block_matrix(round_trip(flat, cfg), cfg.block_size).astype(np.float64)

    bound = scales[:, None].astype(np.float64) * ulp(values, cfg.format).astype(np.float64) / 2.0
    slack = 1e-7 + 4 * float(np.finfo(np.float32).eps) * np.abs(original)
    return int(np.count_nonzero(np.abs(original - restored) > bound + slack))


def compare_codecs(x, configs, bins: int = DEFAULT_BINS, dense_threshold: float | None = None) -> list[CodecComparison]:
    configs = list(configs)
    if not configs:
        raise ConfigurationError("compare_codecs needs at least one codec configuration")
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    rows = []
    for cfg in configs:
        report = error_report(flat, round_trip(flat, cfg), bins=bins, dense_threshold=dense_threshold)
        logger.info("%s: mse=%.3e rel_l2=%.4f zero_collapse=%.4f", cfg.label, report.mse, report.relative_l2,
                    report.zero_collapse_fraction)
        values = scaled_values(flat, cfg)
        fp8_payload = cfg.codec_kind is not CodecKind.IDENTITY and not cfg.codec_kind.integer_payload
        rows.append(CodecComparison(
            config=cfg,
            report=report,
            ratio=compressed_ratio(cfg, flat.size),
            prequant_kurtosis=excess_kurtosis(values),
            underflow_fraction=underflow_fraction(values, cfg.format) if fp8_payload else math.nan,
            prequant_histogram=histogram(values, bins),
        ))
    return rows


def _sweep_entry(flat: np.ndarray, cfg: CodecConfig, bins: int, dense_threshold: float | None) -> SweepRow:
    report = error_report(flat, round_trip(flat, cfg), bins=bins, dense_threshold=dense_threshold)
    return SweepRow(block_size=cfg.block_size, report=report, ratio=compressed_ratio(cfg, flat.size))


def block_size_sweep(x, sizes, cfg_base: CodecConfig | None = None, bins: int = DEFAULT_BINS,
                     dense_threshold: float | None = None, n_jobs: int | None = None) -> list[SweepRow]:
    """
    TACO round trip per block size; rows come back in the order of `sizes`.
    """
    base = (cfg_base or CodecConfig()).with_kind(CodecKind.TACO)
    configs = [replace(base, block_size=validate_block_size(b)) for b in sizes]
    if not configs:
        raise ConfigurationError("block size sweep needs at least one size")
    flat = np.ravel(np.asarray(x, dtype=np.float32))
    jobs = min(len(configs), n_jobs or config.TACO_THREADS)
    return Parallel(n_jobs=jobs, prefer="threads")(
        delayed(_sweep_entry)(flat, cfg, bins, dense_threshold) for cfg in configs
    )
