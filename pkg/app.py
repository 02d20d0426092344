import time
from functools import wraps
from pathlib import Path

import click

from config import config
from models.analysis_model import block_size_sweep, compare_codecs, distribution_stats, error_report
from models.codec_model import CodecConfig, CodecKind, compress, compressed_ratio, decompress
from models.collective_model import Algorithm, FrequencyRow, RankSet, allreduce, error_vs_frequency
from models.fp8_model import FORMATS
from models.synthetic_model import DistributionKind, SyntheticSpec, generate
from services.report_service import (
    REPORT_FORMATS, comparison_frame, histogram_frame, histogram_path, render, simulation_frame, sweep_frame,
    write_report,
)
from services.scenario_service import Scenario, load_scenario
from storage.archive import read_archive, write_archive
from storage.tensor_file import read_raw, read_tensor, write_tensor
from utils.errors import ConfigurationError, TacoError
from utils.logger import logger
from utils.taco_config import DEFAULT_BINS, DEFAULT_SWEEP_SIZES

CODEC_CHOICES = [kind.value for kind in CodecKind]
FORMAT_CHOICES = sorted(FORMATS)


class TacoGroup(click.Group):
    """Maps library errors to one greppable stderr line and exit status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except TacoError as e:
            click.echo(f"error[{e.code}]: {e}", err=True)
            ctx.exit(1)


def parse_codec(name: str, base: CodecConfig) -> CodecConfig:
    """'taco', 'fp8-block', or with an explicit format suffix such as 'taco-e5m2'."""
    name = name.strip().lower()
    fmt = base.format
    for variant in FORMATS:
        if name.endswith(f"-{variant}"):
            name, fmt = name[: -len(variant) - 1], FORMATS[variant]
            break
    try:
        kind = CodecKind(name)
    except ValueError:
        raise ConfigurationError(f"unknown codec '{name}' (expected one of {', '.join(CODEC_CHOICES)})") from None
    return CodecConfig(
        block_size=base.block_size,
        target_energy=base.target_energy,
        stability_epsilon=base.stability_epsilon,
        format=fmt,
        codec_kind=kind,
        saturate=base.saturate,
    )


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{text}'") from None


def _report_format(out, explicit):
    if explicit:
        return explicit
    return "json" if out and Path(out).suffix.lower() == ".json" else "csv"


def _emit(df, out, fmt, deterministic):
    if out:
        write_report(df, out, fmt, deterministic)
    else:
        click.echo(render(df, fmt, deterministic), nl=False)


def codec_options(fn):
    @click.option("--format", "fp8_format", type=click.Choice(FORMAT_CHOICES), default=None,
                  help="FP8 element format (default TACO_FORMAT).")
    @click.option("--block-size", type=int, default=None, help="Block size B, a power of two.")
    @click.option("--tau", type=float, default=None, help="Target energy of the adaptive rescale.")
    @click.option("--epsilon", type=float, default=None, help="Stability epsilon inside the block RMS.")
    @click.option("--no-saturate", is_flag=True, help="Let overflows become Inf (E5M2) instead of clamping.")
    @wraps(fn)
    def wrapper(*args, fp8_format, block_size, tau, epsilon, no_saturate, **kwargs):
        base = CodecConfig.from_env(format=fp8_format, block_size=block_size, target_energy=tau,
                                    stability_epsilon=epsilon, saturate=False if no_saturate else None)
        return fn(*args, base=base, **kwargs)

    return wrapper


def input_options(fn):
    @click.argument("input_path", required=False, type=click.Path(dir_okay=False))
    @click.option("--raw", is_flag=True, help="INPUT is headerless little-endian float32.")
    @click.option("--synthetic", default=None, help="gaussian | mixture | file:<path>")
    @click.option("--length", type=int, default=1_000_000, show_default=True)
    @click.option("--dense-sigma", type=float, default=1e-3, show_default=True)
    @click.option("--tail-sigma", type=float, default=1.0, show_default=True)
    @click.option("--tail-fraction", type=float, default=0.01, show_default=True)
    @click.option("--tail-run", type=int, default=1, show_default=True)
    @click.option("--seed", type=int, default=0, show_default=True)
    @wraps(fn)
    def wrapper(*args, input_path, raw, synthetic, length, dense_sigma, tail_sigma, tail_fraction, tail_run,
                seed, **kwargs):
        if input_path:
            x = read_raw(input_path) if raw else read_tensor(input_path)
        elif synthetic:
            spec = SyntheticSpec.parse(synthetic, n=length, dense_sigma=dense_sigma, tail_sigma=tail_sigma,
                                       tail_fraction=tail_fraction, tail_run=tail_run, seed=seed, raw=raw)
            x = generate(spec)
        else:
            raise click.UsageError("give an INPUT tensor file or --synthetic")
        return fn(*args, x=x, **kwargs)

    return wrapper


def report_options(fn):
    @click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (stdout if omitted).")
    @click.option("--report-format", type=click.Choice(REPORT_FORMATS), default=None,
                  help="Defaults to json for *.json, csv otherwise.")
    @click.option("--deterministic", is_flag=True, help="Leave out the generated_at timestamp.")
    @wraps(fn)
    def wrapper(*args, out, report_format, **kwargs):
        return fn(*args, out=out, report_format=_report_format(out, report_format), **kwargs)

    return wrapper


@click.group(cls=TacoGroup)
def cli():
    """TACO tensor compression: codecs, archives, analysis and simulated AllReduce."""


@cli.command("compress")
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--codec", type=click.Choice(CODEC_CHOICES), default=CodecKind.TACO.value, show_default=True)
@click.option("--raw", is_flag=True, help="INPUT is headerless little-endian float32.")
@codec_options
def compress_cmd(input_path, output_path, codec, raw, base):
    cfg = base.with_kind(codec)
    start = time.perf_counter()
    x = read_raw(input_path) if raw else read_tensor(input_path)
    ct = compress(x, cfg)
    size = write_archive(output_path, ct)
    elapsed = time.perf_counter() - start
    logger.info("compressed %s -> %s with %s", input_path, output_path, cfg.label)
    click.echo(f"N={x.size} blocks={ct.num_blocks} ratio={compressed_ratio(cfg, x.size):.4f} "
               f"bytes={size} time={elapsed:.3f}s")


@cli.command("decompress")
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--reference", type=click.Path(dir_okay=False), default=None,
              help="Original tensor file; prints the relative L2 error against it.")
def decompress_cmd(input_path, output_path, reference):
    start = time.perf_counter()
    ct = read_archive(input_path)
    x = decompress(ct)
    write_tensor(output_path, x)
    elapsed = time.perf_counter() - start
    line = f"N={x.size} codec={ct.codec_kind.value} time={elapsed:.3f}s"
    if reference:
        report = error_report(read_tensor(reference), x)
        line += f" relative_l2={report.relative_l2:.6g}"
    click.echo(line)


@cli.command("analyze")
@input_options
@click.option("--codecs", default="int8,fp8,taco", show_default=True,
              help="Comma-separated codec list; a -e4m3/-e5m2 suffix picks the FP8 format.")
@click.option("--bins", type=int, default=DEFAULT_BINS, show_default=True)
@click.option("--dense-threshold", type=float, default=None, help="Also report MSE over |x| <= threshold.")
@codec_options
@report_options
def analyze_cmd(x, codecs, bins, dense_threshold, base, out, report_format, deterministic):
    configs = [parse_codec(name, base) for name in codecs.split(",") if name.strip()]
    if not configs:
        raise click.BadParameter("at least one codec is required", param_hint="--codecs")

    thresholds = () if dense_threshold is None else (dense_threshold,)
    stats = distribution_stats(x, bins, thresholds=thresholds)
    logger.info("input: N=%d kurtosis=%s", x.size, f"{stats.kurtosis:.3f}" if stats.kurtosis_defined else "undefined")
    for threshold, share in stats.fractions_within.items():
        logger.info("input: %.4f of values within |x| <= %g", share, threshold)

    rows = compare_codecs(x, configs, bins=bins, dense_threshold=dense_threshold)
    _emit(comparison_frame(rows), out, report_format, deterministic)
    if out:
        write_report(histogram_frame(stats.histogram), histogram_path(out, "input"), "csv", deterministic=True)
        for row in rows:
            write_report(histogram_frame(row.report.histogram), histogram_path(out, row.label), "csv",
                         deterministic=True)
            write_report(histogram_frame(row.prequant_histogram), histogram_path(out, f"{row.label}.prequant"),
                         "csv", deterministic=True)


@cli.command("simulate")
@click.option("--ranks", type=int, default=None, help="World size P (default 4).")
@click.option("--length", type=int, default=None, help="Elements per rank (default 65536).")
@click.option("--algorithm", type=click.Choice([a.value for a in Algorithm] + ["all"]), default=None,
              help="Default all.")
@click.option("--codec", default=None, help="Codec, optionally with a format suffix (default taco).")
@click.option("--distribution", default=None, help="gaussian | mixture | file:<path> (default gaussian).")
@click.option("--seed", type=int, default=None, help="Rank r draws with seed + r (default 0).")
@click.option("--chunk-bytes", type=int, default=None, help="Overlap chunk size (default TACO_CHUNK_BYTES).")
@click.option("--scenario", type=click.Path(dir_okay=False), default=None,
              help="KEY=VALUE scenario file; flags override it.")
@click.option("--threads", type=int, default=None, help="Per-rank worker threads (default TACO_THREADS).")
@click.option("--format", "fp8_format", type=click.Choice(FORMAT_CHOICES), default=None)
@click.option("--block-size", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--epsilon", type=float, default=None)
@report_options
def simulate_cmd(ranks, length, algorithm, codec, distribution, seed, chunk_bytes, scenario, threads, fp8_format,
                 block_size, tau, epsilon, out, report_format, deterministic):
    sc = load_scenario(scenario) if scenario else Scenario()
    sc = sc.merged(world_size=ranks, length=length, algorithm=algorithm, codec=codec, distribution=distribution,
                   seed=seed, chunk_bytes=chunk_bytes, format=fp8_format, block_size=block_size,
                   target_energy=tau, stability_epsilon=epsilon)

    world_size = 4 if sc.world_size is None else sc.world_size
    if world_size < 2:
        raise click.UsageError(f"--ranks must be >= 2, got {world_size}")
    base = CodecConfig.from_env(format=sc.format, block_size=sc.block_size, target_energy=sc.target_energy,
                                stability_epsilon=sc.stability_epsilon)
    cfg = parse_codec(sc.codec or CodecKind.TACO.value, base)

    synthetic = {k: v for k, v in {"dense_sigma": sc.dense_sigma, "tail_sigma": sc.tail_sigma,
                                   "tail_fraction": sc.tail_fraction}.items() if v is not None}
    first_seed = sc.seed or 0
    specs = [SyntheticSpec.parse(sc.distribution or DistributionKind.GAUSSIAN.value,
                                 n=sc.length or 1 << 16, seed=first_seed + r, **synthetic)
             for r in range(world_size)]
    rs = RankSet(
        inputs=[generate(spec) for spec in specs],
        algorithm=Algorithm.TWO_SHOT if sc.algorithm in (None, "all") else sc.algorithm,
        codec=cfg,
        chunk_bytes=config.TACO_CHUNK_BYTES if sc.chunk_bytes is None else sc.chunk_bytes,
        n_jobs=threads,
    )

    if sc.algorithm in (None, "all"):
        rows = error_vs_frequency(rs)
    else:
        rows = [FrequencyRow.from_outcome(allreduce(rs))]
    for row in rows:
        click.echo(f"{row.algorithm.value}: relative_l2={row.relative_l2:.6g} "
                   f"invocations={row.compress_invocations} bytes={row.bytes_on_wire}", err=out is None)
    _emit(simulation_frame(rows, world_size, rs.length, cfg.label), out, report_format, deterministic)


@cli.command("sweep")
@input_options
@click.option("--sizes", default=",".join(str(b) for b in DEFAULT_SWEEP_SIZES), show_default=True)
@click.option("--bins", type=int, default=DEFAULT_BINS, show_default=True)
@click.option("--threads", type=int, default=None, help="Worker threads (default TACO_THREADS).")
@codec_options
@report_options
def sweep_cmd(x, sizes, bins, threads, base, out, report_format, deterministic):
    rows = block_size_sweep(x, _int_list(sizes), base, bins=bins, n_jobs=threads)
    for row in rows:
        logger.info("B=%d: ratio=%.4f rel_l2=%.5f", row.block_size, row.ratio, row.report.relative_l2)
    _emit(sweep_frame(rows), out, report_format, deterministic)


if __name__ == "__main__":
    cli()
