"""Multi-environment sample containers and input validation helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def check_matrix(values, context: str = "data") -> np.ndarray:
    """Validate a 2-D finite float matrix and return a read-only float64 copy."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{context}: expected a 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{context}: empty array of shape {arr.shape}")
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{context}: non-finite value at row {bad[0]}, column {bad[1]}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EnvSample:
    """One environment's sample: a finite (n, d) matrix plus its index."""

    env_id: int
    values: np.ndarray

    def __post_init__(self):
        if self.env_id < 0:
            raise ValueError(f"env_id must be nonnegative, got {self.env_id}")
        object.__setattr__(
            self, "values", check_matrix(self.values, f"environment {self.env_id}")
        )

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class MultiEnvDataset:
    """Samples from several environments over one variable schema."""

    schema: tuple[str, ...]
    environments: tuple[EnvSample, ...]

    def __post_init__(self):
        schema = tuple(str(s) for s in self.schema)
        if len(set(schema)) != len(schema):
            raise ValueError("schema contains duplicate variable names")
        envs = tuple(self.environments)
        if not envs:
            raise ValueError("dataset needs at least one environment")
        for env in envs:
            if env.n_vars != len(schema):
                raise ValueError(
                    f"environment {env.env_id} has {env.n_vars} columns, "
                    f"schema has {len(schema)}"
                )
        ids = [env.env_id for env in envs]
        if len(set(ids)) != len(ids):
            raise ValueError("environment ids must be distinct")
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "environments", envs)

    @property
    def n_env(self) -> int:
        return len(self.environments)

    @property
    def n_vars(self) -> int:
        return len(self.schema)

    def env(self, env_id: int) -> EnvSample:
        for e in self.environments:
            if e.env_id == env_id:
                return e
        raise KeyError(f"no environment with id {env_id}")

    def pooled(self) -> np.ndarray:
        """Row-stack every environment and append the index as a last column."""
        blocks = [
            np.column_stack([e.values, np.full(e.n_samples, float(e.env_id))])
            for e in self.environments
        ]
        return np.vstack(blocks)


def default_schema(d: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(d))


def as_dataset(
    data: MultiEnvDataset | Iterable, schema: Sequence[str] | None = None
) -> MultiEnvDataset:
    """Coerce a dataset or a sequence of per-environment matrices."""
    if isinstance(data, MultiEnvDataset):
        return data
    matrices = list(data)
    if not matrices:
        raise ValueError("need at least one environment matrix")
    envs = tuple(EnvSample(e, m) for e, m in enumerate(matrices))
    if schema is None:
        schema = default_schema(envs[0].n_vars)
    return MultiEnvDataset(tuple(schema), envs)
