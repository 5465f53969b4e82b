"""Constraint-based structure recovery: the PC algorithm and a pooled variant.

The skeleton phase is the order-independent ("stable") variant: conditioning
sets at level l are drawn from the adjacency snapshot taken when the level
started, and removals are applied only at level boundaries. Separating sets
are recorded at first discovery, with levels, ordered pairs, and subsets
enumerated in a fixed order, so results never depend on scheduling.

The pooled variant appends the environment index as an extra variable, runs
PC over the widened matrix, forces every edge at the indicator to point away
from it, closes under the Meek rules, and returns the summary graph
restricted to the data variables.
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import MultiEnvDataset, as_dataset
from .exceptions import CiTestError
from .graph import AugmentedDag, Cpdag, Dag, d_separated
from .invariance import KernelConfig, fisher_z_ci, kci_ci
from .mec import _adjacency_from_pairs, _Pattern

# Verdict contract: True means "independent at the working level".
CiTest = Callable[[int, int, tuple[int, ...]], bool]


def oracle_ci_test(g: Dag | AugmentedDag) -> CiTest:
    """CI verdicts read off a ground-truth graph via d-separation."""

    def test(x: int, y: int, z: tuple[int, ...]) -> bool:
        return d_separated(g, x, y, z)

    return test


def _pc_skeleton(n_vars, ci_test, max_cond_size):
    adj = {i: set(range(n_vars)) - {i} for i in range(n_vars)}
    sepsets: dict[tuple[int, int], tuple[int, ...]] = {}
    level = 0
    while level <= max_cond_size:
        snapshot = {i: tuple(sorted(adj[i])) for i in range(n_vars)}
        if not any(len(snapshot[i]) - 1 >= level for i in range(n_vars)):
            break
        removals: dict[tuple[int, int], tuple[int, ...]] = {}
        for i in range(n_vars):
            for j in snapshot[i]:
                pair = (min(i, j), max(i, j))
                if pair in removals:
                    continue
                others = [k for k in snapshot[i] if k != j]
                if len(others) < level:
                    continue
                for cond in combinations(others, level):
                    try:
                        independent = ci_test(i, j, cond)
                    except Exception as err:  # noqa: BLE001 - tagged and re-raised
                        raise CiTestError((i, j, cond), err) from err
                    if independent:
                        removals[pair] = cond
                        break
        for (i, j), cond in removals.items():
            adj[i].discard(j)
            adj[j].discard(i)
            sepsets[(i, j)] = cond
        level += 1
    edges = frozenset(
        (i, j) for i in range(n_vars) for j in adj[i] if i < j
    )
    return edges, sepsets


def _orient_pattern(n_vars, edges, sepsets, sources):
    pattern = _Pattern(
        n_vars,
        _adjacency_from_pairs(n_vars, edges),
        set(),
        set(edges),
        allowed_colliders=None,
    )
    directed: set[tuple[int, int]] = set()

    def orient_edge(u, v):
        pair = (min(u, v), max(u, v))
        if pair not in pattern.undirected or (v, u) in directed:
            return
        pattern.undirected.discard(pair)
        pattern.directed.add((u, v))
        directed.add((u, v))

    # Colliders: i - k - j with i, j non-adjacent form i -> k <- j exactly
    # when k is outside the recorded separating set. Orientations into a
    # source vertex are skipped, and the first orientation of an edge wins.
    adj = pattern.adj
    for k in range(n_vars):
        if k in sources:
            continue
        nbrs = sorted(adj[k])
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                i, j = nbrs[a], nbrs[b]
                if i in adj[j]:
                    continue
                sep = sepsets.get((i, j), ())
                if k not in sep:
                    orient_edge(i, k)
                    orient_edge(j, k)
    for s in sorted(sources):
        for v in sorted(adj[s]):
            orient_edge(s, v)
    # Lenient closure: data-driven sepsets can be inconsistent, so forced
    # orientations that would be illegal are skipped rather than fatal.
    pattern.allowed_colliders = _colliders_of_directed(n_vars, pattern)
    pattern.meek_closure(strict=False)
    return pattern


def _colliders_of_directed(n_vars, pattern):
    allowed = set()
    for k in range(n_vars):
        into_k = sorted(i for (i, j) in pattern.directed if j == k)
        for x in range(len(into_k)):
            for y in range(x + 1, len(into_k)):
                i, j = into_k[x], into_k[y]
                if i not in pattern.adj[j]:
                    allowed.add((i, k, j))
    return frozenset(allowed)


def pc_algorithm(
    n_vars: int,
    ci_test: CiTest,
    max_cond_size: int | None = None,
    names: Sequence[str] | None = None,
) -> Cpdag:
    """Run PC with the given CI verdict function over ``n_vars`` variables.

    ``max_cond_size`` bounds the conditioning-set size (default
    ``n_vars - 2``, which is no bound at all).
    """
    if n_vars < 2:
        raise ValueError("need at least two variables")
    if max_cond_size is None:
        max_cond_size = n_vars - 2
    edges, sepsets = _pc_skeleton(n_vars, ci_test, max_cond_size)
    pattern = _orient_pattern(n_vars, edges, sepsets, sources=frozenset())
    return pattern.to_cpdag(names)


def _restrict_to_data_vars(pattern, d, names):
    directed = frozenset((i, j) for i, j in pattern.directed if i < d and j < d)
    undirected = frozenset((i, j) for i, j in pattern.undirected if i < d and j < d)
    return Cpdag(d, directed, undirected, names)


def _pooled_pipeline(n_total, ci_test, max_cond_size, names):
    env = n_total - 1
    if max_cond_size is None:
        max_cond_size = n_total - 2
    edges, sepsets = _pc_skeleton(n_total, ci_test, max_cond_size)
    pattern = _orient_pattern(n_total, edges, sepsets, sources=frozenset({env}))
    return _restrict_to_data_vars(pattern, env, names)


def pooled_pc(
    data: MultiEnvDataset | Iterable[np.ndarray],
    test_family: str = "fisher_z",
    level: float = 0.05,
    max_cond_size: int | None = None,
    kernel: KernelConfig | None = None,
) -> Cpdag:
    """PC over the environments pooled into one matrix with an index column.

    ``test_family`` is ``"fisher_z"`` or ``"kci"``; ``level`` is the
    per-query significance threshold. The returned summary graph covers only
    the data variables, but its orientations benefit from the indicator
    edges.
    """
    dataset = as_dataset(data)
    if dataset.n_env < 1:
        raise ValueError("need at least one environment")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    pooled = dataset.pooled()
    d = len(dataset.schema)
    env_col = d

    if test_family == "fisher_z":
        def p_value(x, y, z):
            return fisher_z_ci(pooled, x, y, z)
    elif test_family == "kci":
        cfg = kernel if kernel is not None else KernelConfig()

        def p_value(x, y, z):
            return kci_ci(pooled, x, y, z, discrete=frozenset({env_col}), config=cfg)
    else:
        raise ValueError(f"unknown test family {test_family!r}")

    def verdict(x, y, z):
        return p_value(x, y, z) > level

    return _pooled_pipeline(d + 1, verdict, max_cond_size, dataset.schema)


def pooled_pc_oracle(
    scenario, n_env: int | None = None, max_cond_size: int | None = None
) -> Cpdag:
    """Pooled pipeline with verdicts read off the union augmented truth.

    The indicator is attached to every variable whose mechanism differs in at
    least one pair of the first ``n_env`` environments.
    """
    from .mss import pairwise_shift_set  # local import, mss depends on pc's siblings

    k = scenario.n_env if n_env is None else n_env
    if not 1 <= k <= scenario.n_env:
        raise ValueError(f"n_env must be in 1..{scenario.n_env}")
    union: set[int] = set()
    for e in range(k):
        for f in range(e + 1, k):
            union |= pairwise_shift_set(scenario, e, f)
    aug = AugmentedDag(scenario.dag, frozenset(union))
    return _pooled_pipeline(
        scenario.dag.num_vars + 1,
        oracle_ci_test(aug),
        max_cond_size,
        scenario.dag.names,
    )
