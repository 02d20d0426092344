import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import hadamard

from models.hadamard_model import (
    block_matrix, fwht_inverse, fwht_orthonormal, is_power_of_two, join, partition, validate_block_size,
    valid_lengths,
)
from utils.errors import ConfigurationError, EmptyInputError


@pytest.mark.parametrize("b", [2, 4, 8, 16, 32, 64])
def test_matches_sylvester_matrix(b, rng):
    v = rng.standard_normal((10, b)).astype(np.float32)
    expected = v.astype(np.float64) @ hadamard(b).T / np.sqrt(b)
    np.testing.assert_allclose(fwht_orthonormal(v), expected, atol=1e-5)


def test_two_point_example():
    np.testing.assert_allclose(fwht_orthonormal([1.0, 0.0]), [1 / np.sqrt(2), 1 / np.sqrt(2)], rtol=1e-7)
    np.testing.assert_allclose(fwht_orthonormal([3.0, 4.0, 0.0, 0.0]), [3.5, -0.5, 3.5, -0.5], rtol=1e-7)


@pytest.mark.parametrize("b", [32, 64, 128, 256, 512])
def test_involution_and_energy(b, rng):
    v = rng.standard_normal((100, b)).astype(np.float32)
    z = fwht_orthonormal(v)
    back = fwht_inverse(z)

    norms = np.linalg.norm(v.astype(np.float64), axis=1)
    assert np.all(np.linalg.norm((back - v).astype(np.float64), axis=1) <= 1e-6 * norms)
    assert np.all(np.abs(np.linalg.norm(z.astype(np.float64), axis=1) - norms) <= 1e-6 * norms)


def test_constant_block_maps_to_first_coefficient():
    z = fwht_orthonormal(np.ones(256, dtype=np.float32))
    assert z[0] == pytest.approx(16.0)
    assert np.count_nonzero(z[1:]) == 0


@given(arrays(np.float32, 64, elements=st.floats(-1e3, 1e3, width=32)),
       arrays(np.float32, 64, elements=st.floats(-1e3, 1e3, width=32)))
def test_linearity(a, b):
    lhs = fwht_orthonormal(a + b).astype(np.float64)
    rhs = fwht_orthonormal(a).astype(np.float64) + fwht_orthonormal(b).astype(np.float64)
    np.testing.assert_allclose(lhs, rhs, atol=2e-2)


@pytest.mark.parametrize("bad", [0, 3, 6, 100, 1000])
def test_rejects_non_power_of_two_lengths(bad):
    with pytest.raises(ConfigurationError, match="power of two"):
        validate_block_size(bad)


def test_block_size_limits():
    assert validate_block_size(2) == 2
    assert validate_block_size(2 ** 15) == 2 ** 15
    with pytest.raises(ConfigurationError):
        validate_block_size(1)
    with pytest.raises(ConfigurationError):
        validate_block_size(2 ** 16)
    with pytest.raises(ConfigurationError):
        fwht_orthonormal(np.zeros(6, dtype=np.float32))


def test_is_power_of_two():
    assert [n for n in range(20) if is_power_of_two(n)] == [1, 2, 4, 8, 16]


def test_partition_pads_last_block():
    x = np.arange(1, 11, dtype=np.float32)
    blocks = partition(x, 4)
    assert [blk.valid_length for blk in blocks] == [4, 4, 2]
    assert [blk.block_index for blk in blocks] == [0, 1, 2]
    np.testing.assert_array_equal(blocks[2].values, [9, 10, 0, 0])
    np.testing.assert_array_equal(join(blocks), x)


def test_block_matrix_shape():
    rows = block_matrix(np.ones(513, dtype=np.float32), 256)
    assert rows.shape == (3, 256)
    assert rows.dtype == np.float32
    assert rows[2, 0] == 1 and np.count_nonzero(rows[2]) == 1
    np.testing.assert_array_equal(valid_lengths(513, 256), [256, 256, 1])


def test_empty_input_is_rejected():
    with pytest.raises(EmptyInputError):
        partition(np.zeros(0, dtype=np.float32), 4)
    assert join([]).size == 0
