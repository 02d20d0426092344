import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from app import cli
from storage.tensor_file import read_tensor, write_tensor


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tensor_file(tmp_path, rng):
    path = tmp_path / "x.tnsr"
    write_tensor(path, rng.standard_normal(4096).astype(np.float32))
    return path


def test_identity_round_trip_is_byte_identical(runner, tmp_path, tensor_file):
    archive, restored = tmp_path / "x.taco", tmp_path / "y.tnsr"
    result = runner.invoke(cli, ["compress", str(tensor_file), str(archive), "--codec", "identity"])
    assert result.exit_code == 0, result.output
    assert "ratio=1.0000" in result.output

    result = runner.invoke(cli, ["decompress", str(archive), str(restored)])
    assert result.exit_code == 0, result.output
    assert restored.read_bytes() == tensor_file.read_bytes()


def test_taco_round_trip_reports_error(runner, tmp_path, tensor_file):
    archive, restored = tmp_path / "x.taco", tmp_path / "y.tnsr"
    result = runner.invoke(cli, ["compress", str(tensor_file), str(archive)])
    assert result.exit_code == 0, result.output
    assert "N=4096 blocks=16" in result.output
    assert archive.stat().st_size == 22 + 16 * 264

    result = runner.invoke(cli, ["decompress", str(archive), str(restored), "--reference", str(tensor_file)])
    assert result.exit_code == 0, result.output
    error = float(result.output.split("relative_l2=")[1].split()[0])
    assert error <= 0.05
    assert read_tensor(restored).size == 4096


def test_raw_input(runner, tmp_path, rng):
    raw = tmp_path / "x.raw"
    raw.write_bytes(rng.standard_normal(512).astype("<f4").tobytes())
    result = runner.invoke(cli, ["compress", str(raw), str(tmp_path / "x.taco"), "--raw", "--block-size", "64"])
    assert result.exit_code == 0, result.output
    assert "blocks=8" in result.output


def test_bad_block_size_is_reported(runner, tmp_path, tensor_file):
    result = runner.invoke(cli, ["compress", str(tensor_file), str(tmp_path / "x.taco"), "--block-size", "100"])
    assert result.exit_code == 1
    assert "error[E_CONFIG]" in result.output
    assert "block size must be a power of two" in result.output


def test_truncated_archive(runner, tmp_path, tensor_file):
    archive = tmp_path / "x.taco"
    runner.invoke(cli, ["compress", str(tensor_file), str(archive)])
    archive.write_bytes(archive.read_bytes()[:-10])
    result = runner.invoke(cli, ["decompress", str(archive), str(tmp_path / "y.tnsr")])
    assert result.exit_code == 1
    assert "error[E_CORRUPT]" in result.output
    assert "unexpected end of archive" in result.output


def test_analyze_writes_report_and_histograms(runner, tmp_path):
    out = tmp_path / "cmp.csv"
    result = runner.invoke(cli, [
        "analyze", "--synthetic", "mixture", "--length", "65536", "--codecs", "int8,fp8,taco",
        "--bins", "64", "--dense-threshold", "3e-3", "--out", str(out), "--deterministic",
    ])
    assert result.exit_code == 0, result.output

    df = pd.read_csv(out)
    assert list(df["codec"]) == ["int8", "fp8-e4m3", "taco-e4m3"]
    assert "generated_at" not in df.columns
    hist = pd.read_csv(tmp_path / "cmp.taco-e4m3.hist.csv")
    assert len(hist) == 64

    for name in ("cmp.input.hist.csv", "cmp.int8.prequant.hist.csv", "cmp.taco-e4m3.prequant.hist.csv"):
        hist = pd.read_csv(tmp_path / name)
        assert list(hist.columns) == ["bin_left_edge", "count"]
        assert len(hist) == 64
        assert hist["count"].sum() == 65536


def test_prequant_histogram_fills_the_fp8_range(runner, tmp_path):
    out = tmp_path / "cmp.csv"
    result = runner.invoke(cli, ["analyze", "--synthetic", "mixture", "--length", "16384", "--codecs", "taco",
                                 "--out", str(out), "--deterministic"])
    assert result.exit_code == 0, result.output
    hist = pd.read_csv(tmp_path / "cmp.taco-e4m3.prequant.hist.csv")
    assert hist["bin_left_edge"].iloc[0] == pytest.approx(-448.0, rel=1e-3)
    assert hist["count"].iloc[0] + hist["count"].iloc[-1] > 0


def test_analyze_json_and_format_suffix(runner, tmp_path):
    out = tmp_path / "cmp.json"
    result = runner.invoke(cli, [
        "analyze", "--synthetic", "gaussian", "--length", "8192", "--codecs", "taco-e5m2,fp8-block",
        "--out", str(out), "--deterministic",
    ])
    assert result.exit_code == 0, result.output
    records = json.loads(out.read_text())
    assert [r["codec"] for r in records] == ["taco-e5m2", "fp8-block-e4m3"]


def test_analyze_needs_an_input(runner):
    result = runner.invoke(cli, ["analyze", "--codecs", "taco"])
    assert result.exit_code == 2


def test_analyze_unknown_codec(runner):
    result = runner.invoke(cli, ["analyze", "--synthetic", "gaussian", "--length", "1024", "--codecs", "zip"])
    assert result.exit_code == 1
    assert "error[E_CONFIG]" in result.output


def test_simulate_all_algorithms(runner, tmp_path):
    out = tmp_path / "sim.csv"
    result = runner.invoke(cli, [
        "simulate", "--ranks", "8", "--length", "4096", "--algorithm", "all", "--codec", "taco",
        "--out", str(out), "--deterministic",
    ])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert list(df["algorithm"]) == ["twoshot", "ring", "tree"]
    assert list(df["compress_invocations"]) == [2, 14, 6]
    assert set(df["world_size"]) == {8}


def test_simulate_identity_is_exact(runner, tmp_path):
    out = tmp_path / "sim.json"
    result = runner.invoke(cli, ["simulate", "--ranks", "4", "--length", "2048", "--algorithm", "twoshot",
                                 "--codec", "identity", "--out", str(out), "--deterministic"])
    assert result.exit_code == 0, result.output
    records = json.loads(out.read_text())
    assert [r["relative_l2"] for r in records] == [0.0]


def test_simulate_needs_two_ranks(runner):
    result = runner.invoke(cli, ["simulate", "--ranks", "1"])
    assert result.exit_code == 2


def test_simulate_from_scenario(runner, tmp_path):
    scenario = tmp_path / "run.env"
    scenario.write_text("WORLD_SIZE=8\nTENSOR_LENGTH=2048\nCODEC=identity\nALGORITHM=ring\n")
    out = tmp_path / "sim.csv"
    result = runner.invoke(cli, ["simulate", "--scenario", str(scenario), "--ranks", "4", "--out", str(out),
                                 "--deterministic"])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert list(df["algorithm"]) == ["ring"]
    assert list(df["world_size"]) == [4]
    assert list(df["compress_invocations"]) == [6]


def test_sweep(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(cli, ["sweep", "--synthetic", "gaussian", "--length", "16384", "--sizes", "32,64,256",
                                 "--out", str(out), "--deterministic"])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert list(df["block_size"]) == [32, 64, 256]
    assert df["ratio"].is_monotonic_increasing


@pytest.mark.parametrize("args", [
    ["analyze", "--synthetic", "mixture", "--length", "16384", "--codecs", "int8,taco"],
    ["simulate", "--ranks", "4", "--length", "4096", "--algorithm", "all"],
    ["sweep", "--synthetic", "mixture", "--length", "16384", "--sizes", "64,128"],
])
def test_reruns_are_byte_identical(runner, tmp_path, args):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (first, second):
        result = runner.invoke(cli, args + ["--seed", "7", "--out", str(out), "--deterministic"])
        assert result.exit_code == 0, result.output
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.parametrize("codec", ["taco", "fp8-block", "int8"])
def test_compress_and_decompress_reruns_are_byte_identical(runner, tmp_path, tensor_file, codec):
    archives = [tmp_path / "a.taco", tmp_path / "b.taco"]
    tensors = [tmp_path / "a.tnsr", tmp_path / "b.tnsr"]
    for archive, restored in zip(archives, tensors):
        result = runner.invoke(cli, ["compress", str(tensor_file), str(archive), "--codec", codec])
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli, ["decompress", str(archive), str(restored)])
        assert result.exit_code == 0, result.output
    assert archives[0].read_bytes() == archives[1].read_bytes()
    assert tensors[0].read_bytes() == tensors[1].read_bytes()
