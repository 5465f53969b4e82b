"""Shared helpers: bootstrap intervals, deterministic seeds, worker pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV_VAR = "MECHSHIFT_WORKERS"


def cell_seed(master: int, *path: int) -> np.random.SeedSequence:
    """Independent substream for one cell of an experiment grid.

    Keyed by position rather than draw order, so cells can run in any order
    (or in parallel) without changing results.
    """
    return np.random.SeedSequence((master, *path))


def bootstrap_mean_ci(
    values: Sequence[float],
    n_boot: int = 2000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Mean with percentile bootstrap interval, as (mean, lo, hi)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a non-empty 1-D sample")
    rng = np.random.default_rng(np.random.SeedSequence((seed, x.size, n_boot)))
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    means = x[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [tail, 1.0 - tail])
    return float(x.mean()), float(lo), float(hi)


def bootstrap_diff_ci(
    first: Sequence[float],
    second: Sequence[float],
    n_boot: int = 2000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Paired bootstrap for mean(second) - mean(first), as (diff, lo, hi)."""
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("need two equal-length non-empty 1-D samples")
    d = b - a
    rng = np.random.default_rng(np.random.SeedSequence((seed, d.size, n_boot, 1)))
    idx = rng.integers(0, d.size, size=(n_boot, d.size))
    diffs = d[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(diffs, [tail, 1.0 - tail])
    return float(d.mean()), float(lo), float(hi)


def worker_count() -> int:
    """Worker pool size: MECHSHIFT_WORKERS if set, else 1."""
    raw = os.environ.get(WORKERS_ENV_VAR, "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"{WORKERS_ENV_VAR} must be positive, got {n}")
    return n


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map preserving order, forking only when more than one worker is asked for.

    Results must not depend on execution order; pair with cell_seed.
    """
    work = list(items)
    n = worker_count()
    if n == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, work))
