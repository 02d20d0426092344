"""
Tabular reports for codec comparisons, block-size sweeps and collective runs.

CSV follows RFC 4180 (CRLF line endings, minimal quoting); JSON is a list of
row records. Histogram CSVs carry one row per bin.
"""
import csv
import logging
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd

from utils.errors import ConfigurationError, TensorFileError

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("csv", "json")


def comparison_frame(rows) -> pd.DataFrame:
    records = []
    for row in rows:
        r = row.report
        records.append({
            "codec": row.label,
            "block_size": row.config.block_size,
            "ratio": row.ratio,
            "mse": r.mse,
            "dense_mse": r.dense_mse,
            "relative_l2": r.relative_l2,
            "relative_l2_flagged": r.relative_l2_flagged,
            "max_abs_error": r.max_abs_error,
            "zero_collapse_fraction": r.zero_collapse_fraction,
            "error_kurtosis": r.kurtosis,
            "prequant_kurtosis": row.prequant_kurtosis,
            "underflow_fraction": row.underflow_fraction,
        })
    return pd.DataFrame.from_records(records)


def sweep_frame(rows) -> pd.DataFrame:
    return pd.DataFrame.from_records([
        {
            "block_size": row.block_size,
            "ratio": row.ratio,
            "mse": row.report.mse,
            "relative_l2": row.report.relative_l2,
            "max_abs_error": row.report.max_abs_error,
            "zero_collapse_fraction": row.report.zero_collapse_fraction,
        }
        for row in rows
    ])


def simulation_frame(rows, world_size: int, length: int, codec_label: str) -> pd.DataFrame:
    df = pd.DataFrame.from_records([row.to_record() for row in rows])
    df.insert(1, "world_size", world_size)
    df.insert(2, "length", length)
    df.insert(3, "codec", codec_label)
    return df


def histogram_frame(hist) -> pd.DataFrame:
    return pd.DataFrame({
        "bin_left_edge": hist.bin_edges[:-1],
        "count": hist.counts,
    })


def render(df: pd.DataFrame, fmt: str = "csv", deterministic: bool = False) -> str:
    if fmt not in REPORT_FORMATS:
        raise ConfigurationError(f"unknown report format '{fmt}' ({'|'.join(REPORT_FORMATS)})")
    if not deterministic:
        df = df.assign(generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    if fmt == "json":
        return df.to_json(orient="records", indent=2, double_precision=15) + "\n"
    return df.to_csv(index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)


def write_report(df: pd.DataFrame, path, fmt: str = "csv", deterministic: bool = False) -> Path:
    text = render(df, fmt, deterministic)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise TensorFileError(path, f"cannot write report ({e.strerror or e})") from e
    logger.info("wrote %d rows to %s", len(df), path)
    return path


def histogram_path(path, label: str) -> Path:
    """Sibling histogram file: report.csv -> report.taco-e4m3.hist.csv."""
    path = Path(path)
    return path.with_name(f"{path.stem}.{label}.hist.csv")
