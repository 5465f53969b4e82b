"""Markov equivalence classes: enumeration, extensions, summary graphs.

Two DAGs are Markov equivalent iff they share skeleton and colliders. The
enumerator orients the undirected part of the class's summary graph depth
first, pruning with incremental acyclicity / foreign-collider checks and a
Meek-rule closure after every choice, so dead branches are cut early. A brute
force over all DAGs with the same skeleton exists in the test suite as an
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .exceptions import CycleError, MecSizeError, NoConsistentExtensionError
from .graph import Cpdag, Dag, skeleton, v_structures

DEFAULT_MEC_LIMIT = 50_000


class _Pattern:
    """Mutable partially directed graph used during orientation search.

    ``allowed_colliders`` is the set of collider triples the final DAG may
    contain; orienting an edge that creates any other collider kills the
    branch, as does creating a directed cycle.
    """

    __slots__ = ("n", "adj", "directed", "undirected", "allowed_colliders")

    def __init__(self, n, adj, directed, undirected, allowed_colliders):
        self.n = n
        self.adj = adj  # tuple of frozensets, static skeleton adjacency
        self.directed = directed  # set of (i, j)
        self.undirected = undirected  # set of (min, max)
        self.allowed_colliders = allowed_colliders

    def copy(self) -> "_Pattern":
        return _Pattern(
            self.n, self.adj, set(self.directed), set(self.undirected),
            self.allowed_colliders,
        )

    def _creates_cycle(self, u: int, v: int) -> bool:
        # Would u -> v close a directed cycle, i.e. does v already reach u?
        stack = [v]
        seen = {v}
        while stack:
            x = stack.pop()
            if x == u:
                return True
            for y in self.adj[x]:
                if (x, y) in self.directed and y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    def _creates_foreign_collider(self, u: int, v: int) -> bool:
        for w in self.adj[v]:
            if w != u and (w, v) in self.directed and w not in self.adj[u]:
                triple = (min(u, w), v, max(u, w))
                if triple not in self.allowed_colliders:
                    return True
        return False

    def orient(self, u: int, v: int) -> bool:
        """Direct the undirected edge u - v as u -> v; False if that is illegal."""
        pair = (min(u, v), max(u, v))
        if pair not in self.undirected:
            raise ValueError(f"edge {pair} is not undirected")
        if self._creates_cycle(u, v) or self._creates_foreign_collider(u, v):
            return False
        self.undirected.discard(pair)
        self.directed.add((u, v))
        return True

    def meek_closure(self, strict: bool = True) -> bool:
        """Apply orientation rules R1-R4 until fixpoint.

        With ``strict`` a forced orientation that is illegal (cycle or foreign
        collider) returns False: the pattern has no valid completion. The
        lenient mode used after constraint-based search skips such
        orientations instead.
        """
        changed = True
        while changed:
            changed = False
            for i, j in sorted(self.undirected):
                for a, b in ((i, j), (j, i)):
                    if self._rule_fires(a, b):
                        if self.orient(a, b):
                            changed = True
                        elif strict:
                            return False
                        break
        return True

    def _rule_fires(self, a: int, b: int) -> bool:
        directed = self.directed
        adj = self.adj
        # R1: c -> a, a - b, c and b non-adjacent  =>  a -> b
        for c in adj[a]:
            if (c, a) in directed and c != b and c not in adj[b]:
                return True
        # R2: a -> c -> b with a - b  =>  a -> b
        for c in adj[a]:
            if (a, c) in directed and (c, b) in directed:
                return True
        # R3: a - c, a - d, c -> b, d -> b, c and d non-adjacent  =>  a -> b
        spokes = [
            c
            for c in adj[a] & adj[b]
            if (min(a, c), max(a, c)) in self.undirected and (c, b) in directed
        ]
        for x in range(len(spokes)):
            for y in range(x + 1, len(spokes)):
                if spokes[x] not in adj[spokes[y]]:
                    return True
        # R4: a - c, c -> d, d -> b, c and b non-adjacent  =>  a -> b
        for c in adj[a]:
            if (min(a, c), max(a, c)) in self.undirected and c not in adj[b] and c != b:
                for d in adj[c]:
                    if (c, d) in directed and (d, b) in directed:
                        return True
        return False

    def to_cpdag(self, names=None) -> Cpdag:
        return Cpdag(self.n, frozenset(self.directed), frozenset(self.undirected), names)


def _adjacency_from_pairs(n: int, pairs: Iterable[tuple[int, int]]):
    adj = [set() for _ in range(n)]
    for i, j in pairs:
        adj[i].add(j)
        adj[j].add(i)
    return tuple(frozenset(a) for a in adj)


def _pattern_from_dag(g: Dag) -> _Pattern:
    skel = skeleton(g)
    colliders = v_structures(g)
    directed = set()
    for i, k, j in colliders:
        directed.add((i, k))
        directed.add((j, k))
    directed_pairs = {(min(i, j), max(i, j)) for i, j in directed}
    undirected = {p for p in skel if p not in directed_pairs}
    return _Pattern(g.num_vars, _adjacency_from_pairs(g.num_vars, skel),
                    directed, undirected, colliders)


def _collect_extensions(pattern: _Pattern, limit: int | None) -> list[frozenset]:
    """DFS over orientations of the undirected part; returns directed edge sets."""
    out: list[frozenset] = []

    def extend(pat: _Pattern) -> None:
        if not pat.undirected:
            if limit is not None and len(out) >= limit:
                raise MecSizeError(partial_count=len(out), limit=limit)
            out.append(frozenset(pat.directed))
            return
        i, j = min(pat.undirected)
        for u, v in ((i, j), (j, i)):
            child = pat.copy()
            if child.orient(u, v) and child.meek_closure(strict=True):
                extend(child)

    extend(pattern)
    return out


def enumerate_mec(g: Dag, limit: int | None = DEFAULT_MEC_LIMIT) -> "MecEnumeration":
    """Enumerate every DAG Markov equivalent to ``g``.

    Members are returned sorted lexicographically by their sorted edge list.
    Raises :class:`MecSizeError` when the class exceeds ``limit``; pass
    ``limit=None`` to enumerate regardless of size.
    """
    pattern = _pattern_from_dag(g)
    if not pattern.meek_closure(strict=True):
        raise AssertionError("closure of a DAG's own pattern cannot fail")
    edge_sets = _collect_extensions(pattern, limit)
    members = sorted(
        (Dag(g.num_vars, es, g.names) for es in edge_sets),
        key=lambda d: tuple(sorted(d.edges)),
    )
    return MecEnumeration(
        members=tuple(members),
        skeleton=skeleton(g),
        colliders=v_structures(g),
    )


@dataclass(frozen=True)
class MecEnumeration:
    """Result of :func:`enumerate_mec`."""

    members: tuple[Dag, ...]
    skeleton: frozenset[tuple[int, int]]
    colliders: frozenset[tuple[int, int, int]]
    truncated: bool = False

    @property
    def size(self) -> int:
        return len(self.members)


def enumerate_extensions(
    c: Cpdag, limit: int | None = DEFAULT_MEC_LIMIT
) -> tuple[Dag, ...]:
    """All DAGs that orient ``c`` without new colliders or cycles.

    Directed edges of ``c`` are preserved; the colliders of the result must
    all be colliders of ``c``'s directed part. Raises
    :class:`NoConsistentExtensionError` when no such DAG exists.
    """
    adj = _adjacency_from_pairs(c.num_vars, skeleton(c))
    allowed = set()
    for k in range(c.num_vars):
        into_k = sorted(i for i, j in c.directed if j == k)
        for x in range(len(into_k)):
            for y in range(x + 1, len(into_k)):
                i, j = into_k[x], into_k[y]
                if i not in adj[j]:
                    allowed.add((i, k, j))
    pattern = _Pattern(c.num_vars, adj, set(c.directed), set(c.undirected),
                       frozenset(allowed))
    if not pattern.meek_closure(strict=True):
        raise NoConsistentExtensionError("orientation rules reach a contradiction")
    edge_sets = _collect_extensions(pattern, limit)
    dags = []
    for es in edge_sets:
        try:
            dags.append(Dag(c.num_vars, es, c.names))
        except CycleError:
            continue
    if not dags:
        raise NoConsistentExtensionError("graph admits no consistent extension")
    return tuple(sorted(dags, key=lambda d: tuple(sorted(d.edges))))


def cpdag_of(dags: Sequence[Dag]) -> Cpdag:
    """Summary graph of a DAG set: an edge is directed iff every member agrees.

    All members must share vertex count and skeleton.
    """
    if not dags:
        raise ValueError("need at least one DAG")
    first = dags[0]
    skel = skeleton(first)
    for d in dags[1:]:
        if d.num_vars != first.num_vars:
            raise ValueError("DAGs have different vertex counts")
        if skeleton(d) != skel:
            raise ValueError("DAGs have different skeletons")
    directed = set()
    undirected = set()
    for i, j in sorted(skel):
        if all((i, j) in d.edges for d in dags):
            directed.add((i, j))
        elif all((j, i) in d.edges for d in dags):
            directed.add((j, i))
        else:
            undirected.add((i, j))
    return Cpdag(first.num_vars, frozenset(directed), frozenset(undirected),
                 first.names)
