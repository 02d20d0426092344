"""
In-process AllReduce simulator with pluggable compression.

Ranks exchange immutable compressed messages in rounds. Work inside a round is
independent per rank and may run on a thread pool; results depend on the inputs
only, never on scheduling. Reductions happen in float32 on decompressed values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from config import config
from models.codec_model import CodecConfig, CompressedTensor, compress, decompress
from models.hadamard_model import is_power_of_two
from utils.errors import ConfigurationError, InputValidationError, LengthMismatchError

logger = logging.getLogger(__name__)

Message = list[CompressedTensor]


class Algorithm(str, Enum):
    TWO_SHOT = "twoshot"
    RING = "ring"
    TREE = "tree"


@dataclass
class RankSet:
    inputs: list[np.ndarray]
    algorithm: Algorithm = Algorithm.TWO_SHOT
    codec: CodecConfig = field(default_factory=CodecConfig)
    chunk_bytes: int | None = None
    n_jobs: int | None = None

    def __post_init__(self):
        try:
            self.algorithm = Algorithm(self.algorithm)
        except ValueError:
            raise ConfigurationError(f"unknown algorithm '{self.algorithm}' (twoshot|ring|tree)") from None
        self.inputs = [np.ravel(np.asarray(x, dtype=np.float32)) for x in self.inputs]
        if len(self.inputs) < 2:
            raise ConfigurationError(f"world size must be >= 2, got {len(self.inputs)}")
        lengths = {x.size for x in self.inputs}
        if len(lengths) != 1:
            raise LengthMismatchError(f"all ranks must hold the same length, got {sorted(lengths)}")
        if self.length == 0:
            raise ConfigurationError("rank inputs must not be empty")
        if not all(np.all(np.isfinite(x)) for x in self.inputs):
            raise InputValidationError("rank inputs must be finite")
        if self.chunk_bytes is not None and self.chunk_bytes < 4:
            raise ConfigurationError(f"chunk size must be >= 4 bytes, got {self.chunk_bytes}")

    @property
    def world_size(self) -> int:
        return len(self.inputs)

    @property
    def length(self) -> int:
        return int(self.inputs[0].size)


@dataclass
class AllReduceOutcome:
    algorithm: Algorithm
    result: np.ndarray
    exact: np.ndarray
    compress_invocations: int
    bytes_on_wire: int
    stage_errors: tuple[float, float]
    rank_results: list[np.ndarray] = field(repr=False)
    per_rank_invocations: list[int] = field(repr=False)

    @property
    def relative_l2(self) -> float:
        return norm_ratio(self.result - self.exact, self.exact)

    @property
    def rank_divergence(self) -> float:
        """Largest abs difference between any rank's copy and rank 0's copy."""
        return max(float(np.max(np.abs(r - self.result))) for r in self.rank_results)


@dataclass(frozen=True)
class FrequencyRow:
    algorithm: Algorithm
    relative_l2: float
    compress_invocations: int
    bytes_on_wire: int
    rank_divergence: float
    reduce_error: float
    gather_error: float

    @classmethod
    def from_outcome(cls, outcome: AllReduceOutcome) -> "FrequencyRow":
        return cls(
            algorithm=outcome.algorithm,
            relative_l2=outcome.relative_l2,
            compress_invocations=outcome.compress_invocations,
            bytes_on_wire=outcome.bytes_on_wire,
            rank_divergence=outcome.rank_divergence,
            reduce_error=outcome.stage_errors[0],
            gather_error=outcome.stage_errors[1],
        )

    def to_record(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "relative_l2": self.relative_l2,
            "compress_invocations": self.compress_invocations,
            "bytes_on_wire": self.bytes_on_wire,
            "rank_divergence": self.rank_divergence,
            "reduce_error": self.reduce_error,
            "gather_error": self.gather_error,
        }


def norm_ratio(delta: np.ndarray, reference: np.ndarray) -> float:
    """||delta|| / ||reference|| in float64; 0 when both vanish, inf when only the reference does."""
    ref = float(np.linalg.norm(reference.astype(np.float64)))
    err = float(np.linalg.norm(delta.astype(np.float64)))
    if ref == 0:
        return 0.0 if err == 0 else math.inf
    return err / ref


def sequential_sum(inputs: list[np.ndarray]) -> np.ndarray:
    """Rank-ascending float32 sum, the reference every algorithm is measured against."""
    acc = inputs[0].astype(np.float32, copy=True)
    for x in inputs[1:]:
        acc = acc + x
    return acc


class _Fabric:
    """Message transport plus per-rank compression counters."""

    def __init__(self, world_size: int, codec: CodecConfig, chunk_bytes: int | None, n_jobs: int):
        self.codec = codec
        self.invocations = [0] * world_size
        self.bytes_on_wire = 0
        self.n_jobs = n_jobs
        self.chunk_elems = None
        if chunk_bytes and codec.codec_kind.block_local:
            self.chunk_elems = max(1, (chunk_bytes // 4) // codec.block_size) * codec.block_size
        elif chunk_bytes:
            logger.debug("chunking ignored for %s: its scale spans the whole message", codec.label)

    def each(self, fn, ranks) -> list:
        ranks = list(ranks)
        if self.n_jobs <= 1 or len(ranks) < 2:
            return [fn(r) for r in ranks]
        return Parallel(n_jobs=min(self.n_jobs, len(ranks)), prefer="threads")(delayed(fn)(r) for r in ranks)

    def chunks(self, x: np.ndarray) -> Message:
        if self.chunk_elems is None or x.size <= self.chunk_elems:
            return [compress(x, self.codec)]
        return [compress(x[i:i + self.chunk_elems], self.codec) for i in range(0, x.size, self.chunk_elems)]

    def pack(self, rank: int, x: np.ndarray) -> Message:
        """One compression pass over one logical message."""
        self.invocations[rank] += 1
        return self.chunks(x)

    def send(self, message: Message, copies: int = 1) -> Message:
        self.bytes_on_wire += copies * sum(ct.nbytes for ct in message)
        return message

    def unpack(self, message: Message) -> np.ndarray:
        return np.concatenate([decompress(ct, self.codec) for ct in message])


def _padded(inputs: list[np.ndarray], multiple: int) -> list[np.ndarray]:
    n = inputs[0].size
    target = -(-n // multiple) * multiple
    if target == n:
        return inputs
    return [np.concatenate([x, np.zeros(target - n, dtype=np.float32)]) for x in inputs]


def _two_shot(inputs: list[np.ndarray], fabric: _Fabric):
    p = len(inputs)
    shard = inputs[0].size // p

    def scatter(r):
        fabric.invocations[r] += 1  # one batched pass over all P shards
        return [fabric.chunks(s) for s in inputs[r].reshape(p, shard)]

    outgoing = fabric.each(scatter, range(p))
    for r in range(p):
        for dest in range(p):
            if dest != r:
                fabric.send(outgoing[r][dest])

    def reduce_owned(owner):
        acc = fabric.unpack(outgoing[0][owner])
        for sender in range(1, p):
            acc = acc + fabric.unpack(outgoing[sender][owner])
        return acc

    reduced = fabric.each(reduce_owned, range(p))
    gathered = fabric.each(lambda owner: fabric.pack(owner, reduced[owner]), range(p))
    for msg in gathered:
        fabric.send(msg, copies=p - 1)

    # every rank decodes the same bytes, so all copies match
    result = np.concatenate([fabric.unpack(msg) for msg in gathered])
    return np.concatenate(reduced), [result] * p


def _ring(inputs: list[np.ndarray], fabric: _Fabric):
    p = len(inputs)
    shard = inputs[0].size // p
    held = [list(x.reshape(p, shard).copy()) for x in inputs]

    # reduce-scatter: chunk c ends up complete on rank (c - 1) mod P
    for step in range(p - 1):
        chunk_of = [(r - step) % p for r in range(p)]
        messages = fabric.each(lambda r: fabric.pack(r, held[r][chunk_of[r]]), range(p))
        for r, msg in enumerate(messages):
            dest, c = (r + 1) % p, chunk_of[r]
            held[dest][c] = fabric.unpack(fabric.send(msg)) + held[dest][c]

    reduced = np.concatenate([held[(c - 1) % p][c] for c in range(p)])

    # all-gather: every hop recompresses what it forwards
    for step in range(p - 1):
        chunk_of = [(r + 1 - step) % p for r in range(p)]
        messages = fabric.each(lambda r: fabric.pack(r, held[r][chunk_of[r]]), range(p))
        for r, msg in enumerate(messages):
            decoded = fabric.unpack(fabric.send(msg))
            held[(r + 1) % p][chunk_of[r]] = decoded
            if step == 0:
                held[r][chunk_of[r]] = decoded  # owner keeps the version it put on the wire

    return reduced, [np.concatenate(h) for h in held]


def _tree(inputs: list[np.ndarray], fabric: _Fabric):
    p = len(inputs)
    if not is_power_of_two(p):
        raise ConfigurationError(f"tree allreduce needs a power-of-two world size, got {p}")
    rounds = p.bit_length() - 1
    n = inputs[0].size
    vectors = [x.copy() for x in inputs]
    spans = [(0, n)] * p

    # recursive halving: rank r keeps the half selected by bit d and ends owning shard r
    for d in reversed(range(rounds)):
        keeps, gives = [], []
        for r in range(p):
            lo, hi = spans[r]
            mid = (lo + hi) // 2
            lower, upper = (lo, mid), (mid, hi)
            keeps.append(upper if (r >> d) & 1 else lower)
            gives.append(lower if (r >> d) & 1 else upper)

        messages = fabric.each(lambda r: fabric.pack(r, vectors[r][gives[r][0]:gives[r][1]]), range(p))
        for msg in messages:
            fabric.send(msg)
        for r in range(p):
            lo, hi = keeps[r]
            vectors[r][lo:hi] = vectors[r][lo:hi] + fabric.unpack(messages[r ^ (1 << d)])
        spans = keeps

    seg = n // p
    reduced = np.concatenate([vectors[r][r * seg:(r + 1) * seg] for r in range(p)])

    # recursive doubling: each round a rank ships everything it has gathered so far
    for d in range(rounds):
        messages = fabric.each(lambda r: fabric.pack(r, vectors[r][spans[r][0]:spans[r][1]]), range(p))
        for msg in messages:
            fabric.send(msg)
        decoded = [fabric.unpack(msg) for msg in messages]
        for r in range(p):
            for src in (r, r ^ (1 << d)):
                lo, hi = spans[src]
                vectors[r][lo:hi] = decoded[src]
        spans = [(min(spans[r][0], spans[r ^ (1 << d)][0]), max(spans[r][1], spans[r ^ (1 << d)][1]))
                 for r in range(p)]

    return reduced, vectors


_ALGORITHMS = {
    Algorithm.TWO_SHOT: _two_shot,
    Algorithm.RING: _ring,
    Algorithm.TREE: _tree,
}


def allreduce(rs: RankSet) -> AllReduceOutcome:
    p, n = rs.world_size, rs.length
    fabric = _Fabric(p, rs.codec, rs.chunk_bytes, rs.n_jobs or config.TACO_THREADS)

    reduced, copies = _ALGORITHMS[rs.algorithm](_padded(rs.inputs, p), fabric)
    exact = sequential_sum(rs.inputs)
    reduced = reduced[:n]
    copies = [c[:n].copy() for c in copies]

    if len(set(fabric.invocations)) != 1:
        logger.warning("uneven compression counts across ranks: %s", fabric.invocations)

    outcome = AllReduceOutcome(
        algorithm=rs.algorithm,
        result=copies[0],
        exact=exact,
        compress_invocations=max(fabric.invocations),
        bytes_on_wire=fabric.bytes_on_wire,
        stage_errors=(norm_ratio(reduced - exact, exact), norm_ratio(copies[0] - reduced, exact)),
        rank_results=copies,
        per_rank_invocations=list(fabric.invocations),
    )
    logger.info("%s P=%d N=%d codec=%s: rel_l2=%.3e invocations=%d wire=%dB",
                rs.algorithm.value, p, n, rs.codec.label, outcome.relative_l2,
                outcome.compress_invocations, outcome.bytes_on_wire)
    return outcome


def error_vs_frequency(rs: RankSet) -> list[FrequencyRow]:
    """Same inputs and codec under every algorithm; rows in TwoShot, Ring, Tree order."""
    rows = []
    for algorithm in Algorithm:
        if algorithm is Algorithm.TREE and not is_power_of_two(rs.world_size):
            logger.warning("skipping tree: world size %d is not a power of two", rs.world_size)
            continue
        outcome = allreduce(RankSet(inputs=rs.inputs, algorithm=algorithm, codec=rs.codec,
                                    chunk_bytes=rs.chunk_bytes, n_jobs=rs.n_jobs))
        rows.append(FrequencyRow.from_outcome(outcome))
    return rows
