import numpy as np
import pytest

from models.codec_model import CodecConfig
from models.synthetic_model import DistributionKind, SyntheticSpec, generate

N_SMALL = 1 << 18


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def taco_cfg():
    return CodecConfig()


@pytest.fixture(scope="session")
def gaussian_tensor():
    return generate(SyntheticSpec(kind=DistributionKind.GAUSSIAN, n=N_SMALL, seed=1))


@pytest.fixture(scope="session")
def mixture_tensor():
    # dense N(0, 1e-3^2) bulk with a 1% N(0, 1) tail
    return generate(SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=N_SMALL, seed=2))


@pytest.fixture(scope="session")
def outlier_tensor():
    return generate(SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=N_SMALL, dense_sigma=1.0,
                                  tail_sigma=100.0, tail_fraction=1e-4, seed=3))


@pytest.fixture(scope="session")
def collapse_tensor():
    return generate(SyntheticSpec(kind=DistributionKind.NEAR_ZERO_MIXTURE, n=N_SMALL, dense_sigma=1e-6,
                                  tail_sigma=1.0, tail_fraction=0.1, seed=4))
