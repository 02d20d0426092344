import numpy as np
import pytest

from models.synthetic_model import DistributionKind, SyntheticSpec, generate
from storage.tensor_file import write_tensor
from utils.errors import ConfigurationError


def test_same_seed_same_tensor():
    spec = SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=10_000, seed=3)
    np.testing.assert_array_equal(generate(spec), generate(spec))
    other = SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=10_000, seed=4)
    assert not np.array_equal(generate(spec), generate(other))


def test_gaussian_moments():
    x = generate(SyntheticSpec(kind=DistributionKind.GAUSSIAN, n=100_000, sigma=2.0, seed=1))
    assert x.dtype == np.float32
    assert x.size == 100_000
    assert np.std(x) == pytest.approx(2.0, rel=0.02)


def test_mixture_has_dense_bulk_and_tail():
    x = generate(SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=100_000, seed=2))
    assert np.mean(np.abs(x) <= 5e-3) > 0.98
    assert np.max(np.abs(x)) > 2.0


def _neighbour_share(x: np.ndarray, threshold: float = 0.05) -> float:
    large = np.abs(x) > threshold
    paired = large[:-1] & large[1:]
    return paired.sum() / large.sum()


def test_clustered_tail_keeps_values_and_forms_runs():
    base = dict(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=50_000, seed=9)
    spread = generate(SyntheticSpec(**base))
    clustered = generate(SyntheticSpec(tail_run=8, **base))
    np.testing.assert_array_equal(np.sort(spread), np.sort(clustered))
    assert _neighbour_share(clustered) > 0.5
    assert _neighbour_share(spread) < 0.1


def test_parse_kinds(tmp_path):
    assert SyntheticSpec.parse("gaussian").kind is DistributionKind.GAUSSIAN
    assert SyntheticSpec.parse("mixture", n=10).n == 10

    path = tmp_path / "g.tnsr"
    write_tensor(path, np.arange(5, dtype=np.float32))
    spec = SyntheticSpec.parse(f"file:{path}")
    assert spec.kind is DistributionKind.FILE
    np.testing.assert_array_equal(generate(spec), np.arange(5, dtype=np.float32))


@pytest.mark.parametrize("text, params", [
    ("uniform", {}),
    ("mixture", {"tail_fraction": 1.5}),
    ("mixture", {"n": 0}),
    ("mixture", {"dense_sigma": 0.0}),
    ("mixture", {"tail_run": 0}),
    ("file:", {}),
])
def test_parse_rejects_bad_specs(text, params):
    with pytest.raises(ConfigurationError):
        SyntheticSpec.parse(text, **params)
