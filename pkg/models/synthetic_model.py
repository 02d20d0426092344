from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from storage.tensor_file import read_raw, read_tensor
from utils.errors import ConfigurationError


class DistributionKind(str, Enum):
    GAUSSIAN = "gaussian"
    NEAR_ZERO_MIXTURE = "mixture"
    FILE = "file"


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Stand-in for captured tensor-parallel activations: a dense near-zero bulk
    N(0, dense_sigma^2) plus a long tail N(0, tail_sigma^2).
    """
    kind: DistributionKind = DistributionKind.GAUSSIAN
    n: int = 1_000_000
    dense_sigma: float = 1e-3
    tail_sigma: float = 1.0
    tail_fraction: float = 0.01
    seed: int = 0
    sigma: float = 1.0
    tail_run: int = 1
    path: str | None = None
    raw: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", DistributionKind(self.kind))
        if self.kind is DistributionKind.FILE:
            if not self.path:
                raise ConfigurationError("file distribution needs a path")
            return
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if not 0.0 <= self.tail_fraction <= 1.0:
            raise ConfigurationError(f"tail_fraction must lie in [0, 1], got {self.tail_fraction}")
        if not (self.dense_sigma > 0 and self.tail_sigma > 0 and self.sigma > 0):
            raise ConfigurationError("sigmas must be > 0")
        if self.tail_run < 1:
            raise ConfigurationError(f"tail_run must be >= 1, got {self.tail_run}")

    @classmethod
    def parse(cls, text: str, **params) -> "SyntheticSpec":
        """'gaussian', 'mixture' or 'file:<path>'."""
        if text.startswith("file:"):
            return cls(kind=DistributionKind.FILE, path=text[len("file:"):], **params)
        try:
            kind = DistributionKind(text)
        except ValueError:
            raise ConfigurationError(f"unknown distribution '{text}' (gaussian|mixture|file:<path>)") from None
        return cls(kind=kind, **params)


def generate(spec: SyntheticSpec) -> np.ndarray:
    if spec.kind is DistributionKind.FILE:
        return read_raw(spec.path) if spec.raw else read_tensor(spec.path)

    rng = np.random.default_rng(spec.seed)
    if spec.kind is DistributionKind.GAUSSIAN:
        return (rng.standard_normal(spec.n) * spec.sigma).astype(np.float32)
    return _mixture(spec, rng)


def _mixture(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n_tail = int(round(spec.tail_fraction * spec.n))
    dense = rng.normal(0.0, spec.dense_sigma, spec.n - n_tail)
    tail = rng.normal(0.0, spec.tail_sigma, n_tail)

    if spec.tail_run == 1:
        return rng.permutation(np.concatenate([dense, tail])).astype(np.float32)

    # shuffle whole runs so tail values stay clustered, like outlier tokens
    source = np.concatenate([dense, tail])
    run_lengths = np.diff(np.append(np.arange(0, n_tail, spec.tail_run), n_tail))
    lengths = np.concatenate([np.ones(dense.size, dtype=np.int64), run_lengths])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])

    order = rng.permutation(lengths.size)
    out_lengths = lengths[order]
    out_starts = np.concatenate([[0], np.cumsum(out_lengths)[:-1]])
    offsets = np.arange(spec.n) - np.repeat(out_starts, out_lengths)
    return source[np.repeat(starts[order], out_lengths) + offsets].astype(np.float32)
