"""Independent reference implementations the tests check the library against.

Everything here trades speed for obviousness: DAG enumeration by filtering
all edge assignments, d-separation by enumerating every undirected path,
equivalence classes by filtering the full DAG list on skeleton and
colliders. Nothing imports the algorithms under test.
"""

from __future__ import annotations

import itertools

import numpy as np

from mechshift import AugmentedDag, Dag, skeleton, v_structures


def all_dags(n: int) -> list[Dag]:
    """Every labeled DAG on n vertices (each pair absent, ->, or <-)."""
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (i, j), c in zip(pairs, choice):
            if c == 1:
                edges.append((i, j))
            elif c == 2:
                edges.append((j, i))
        if _acyclic(n, edges):
            out.append(Dag(n, edges))
    return out


def _acyclic(n: int, edges: list[tuple[int, int]]) -> bool:
    children = {i: [] for i in range(n)}
    for i, j in edges:
        children[i].append(j)
    seen = {}

    def visit(v):
        if seen.get(v) == 1:
            return False
        if seen.get(v) == 2:
            return True
        seen[v] = 1
        ok = all(visit(c) for c in children[v])
        seen[v] = 2
        return ok

    return all(visit(v) for v in range(n))


def _node_count(g: Dag | AugmentedDag) -> int:
    return g.env_index + 1 if isinstance(g, AugmentedDag) else g.num_vars


def _ancestors(g, targets: set[int]) -> set[int]:
    out = set(targets)
    frontier = list(targets)
    while frontier:
        v = frontier.pop()
        for p in g.parents(v):
            if p not in out:
                out.add(p)
                frontier.append(p)
    return out


def path_d_separated(g: Dag | AugmentedDag, a: int, b: int, z) -> bool:
    """d-separation by brute force over every simple undirected path."""
    z = set(z)
    n = _node_count(g)
    adj = {v: set() for v in range(n)}
    for i, j in skeleton(g):
        adj[i].add(j)
        adj[j].add(i)
    an_z = _ancestors(g, z) if z else set()
    parent_sets = {v: set(g.parents(v)) for v in range(n)}

    def active(path) -> bool:
        for idx in range(1, len(path) - 1):
            prev, node, nxt = path[idx - 1], path[idx], path[idx + 1]
            collider = prev in parent_sets[node] and nxt in parent_sets[node]
            if collider:
                if node not in an_z:
                    return False
            elif node in z:
                return False
        return True

    def paths(v, target, visited):
        if v == target:
            yield tuple(visited)
            return
        for w in adj[v]:
            if w not in visited:
                yield from paths(w, target, visited + [w])

    return not any(active(p) for p in paths(a, b, [a]))


def brute_force_mec(g: Dag, universe: list[Dag] | None = None) -> list[Dag]:
    """Members of g's equivalence class by skeleton + collider filtering."""
    if universe is None:
        universe = all_dags(g.num_vars)
    sk, vs = skeleton(g), v_structures(g)
    return [h for h in universe if skeleton(h) == sk and v_structures(h) == vs]


def linear_scm(coeffs: dict, d: int, n: int, rng, noise_scale=None, means=None):
    """Linear-Gaussian draws: column j = sum_i coeffs[(i, j)] * col_i + noise.

    Columns are filled left to right, so coefficients must point forward
    (i < j).
    """
    scale = dict(noise_scale or {})
    mean = dict(means or {})
    out = np.zeros((n, d))
    for j in range(d):
        noise = scale.get(j, 1.0) * rng.standard_normal(n) + mean.get(j, 0.0)
        total = noise
        for (i, jj), b in coeffs.items():
            if jj == j:
                total = total + b * out[:, i]
        out[:, j] = total
    return out
