"""
Simulator scenarios stored as KEY=VALUE text, read with python-dotenv.

    WORLD_SIZE=8
    TENSOR_LENGTH=1048576
    DISTRIBUTION=mixture
    ALGORITHM=all
    CODEC=taco
"""
from dataclasses import dataclass, fields
from pathlib import Path

from dotenv import dotenv_values

from utils.errors import ConfigurationError, TensorFileError

_KEYS = {
    "WORLD_SIZE": ("world_size", int),
    "TENSOR_LENGTH": ("length", int),
    "DISTRIBUTION": ("distribution", str),
    "SEED": ("seed", int),
    "ALGORITHM": ("algorithm", str),
    "CODEC": ("codec", str),
    "FORMAT": ("format", str),
    "BLOCK_SIZE": ("block_size", int),
    "TAU": ("target_energy", float),
    "EPSILON": ("stability_epsilon", float),
    "DENSE_SIGMA": ("dense_sigma", float),
    "TAIL_SIGMA": ("tail_sigma", float),
    "TAIL_FRACTION": ("tail_fraction", float),
    "CHUNK_BYTES": ("chunk_bytes", int),
}


@dataclass(frozen=True)
class Scenario:
    world_size: int | None = None
    length: int | None = None
    distribution: str | None = None
    seed: int | None = None
    algorithm: str | None = None
    codec: str | None = None
    format: str | None = None
    block_size: int | None = None
    target_energy: float | None = None
    stability_epsilon: float | None = None
    dense_sigma: float | None = None
    tail_sigma: float | None = None
    tail_fraction: float | None = None
    chunk_bytes: int | None = None

    def merged(self, **overrides) -> "Scenario":
        """Command-line values win over file values; None means 'not given'."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return Scenario(**values)


def parse_scenario(values: dict) -> Scenario:
    unknown = sorted(set(values) - set(_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {', '.join(unknown)}")
    parsed = {}
    for key, raw in values.items():
        name, cast = _KEYS[key]
        if raw is None or raw.strip() == "":
            continue
        try:
            parsed[name] = cast(raw.strip())
        except ValueError:
            raise ConfigurationError(f"scenario key {key}: cannot read '{raw}' as {cast.__name__}") from None
    return Scenario(**parsed)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise TensorFileError(path, "scenario file not found")
    return parse_scenario(dict(dotenv_values(path)))
