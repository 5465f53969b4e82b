"""CSV persistence for multi-environment data, plus column transforms.

One file per environment: a header row with the variable names followed by
one row per sample. Floats are written with ``repr``, the shortest decimal
that round-trips, so ``load(save(x)) == x`` bit for bit.
"""

from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

import numpy as np

from .data import EnvSample, MultiEnvDataset
from .exceptions import DatasetFormatError


def save_env_csv(env: EnvSample, schema: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema)
        for row in env.values:
            writer.writerow([repr(float(v)) for v in row])


def save_multi_env(dataset: MultiEnvDataset, directory) -> list[str]:
    """Write ``env_<id>.csv`` per environment; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for env in dataset.environments:
        path = os.path.join(directory, f"env_{env.env_id}.csv")
        save_env_csv(env, dataset.schema, path)
        paths.append(path)
    return paths


def _read_csv(path, max_rows: int | None):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        header = tuple(h.strip() for h in header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, "
                        f"column {header[col]!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DatasetFormatError(
                        f"{path}: non-finite value at row {lineno}, "
                        f"column {header[col]!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
            if max_rows is not None and len(rows) >= max_rows:
                break
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=np.float64)


def load_multi_env(paths: Iterable, max_rows: int | None = None) -> MultiEnvDataset:
    """Load one CSV per environment, in order; headers must agree exactly."""
    paths = [os.fspath(p) for p in paths]
    if not paths:
        raise DatasetFormatError("no dataset files given")
    schema = None
    first_path = None
    envs = []
    for e, path in enumerate(paths):
        header, values = _read_csv(path, max_rows)
        if schema is None:
            schema, first_path = header, path
        elif header != schema:
            raise DatasetFormatError(
                f"{path}: header {list(header)} does not match "
                f"{list(schema)} from {first_path}"
            )
        envs.append(EnvSample(e, values))
    return MultiEnvDataset(schema, tuple(envs))


def preprocess(dataset: MultiEnvDataset, transform: str = "none") -> MultiEnvDataset:
    """Apply a per-entry transform; ``log`` requires strictly positive data."""
    if transform == "none":
        return dataset
    if transform != "log":
        raise ValueError(f"unknown transform {transform!r}")
    envs = []
    for env in dataset.environments:
        values = env.values
        if (values <= 0).any():
            r, c = np.argwhere(values <= 0)[0]
            raise ValueError(
                f"log transform needs positive entries; environment {env.env_id} "
                f"has {values[r, c]!r} at row {r}, column {dataset.schema[c]!r}"
            )
        envs.append(EnvSample(env.env_id, np.log(values)))
    return MultiEnvDataset(dataset.schema, tuple(envs))
