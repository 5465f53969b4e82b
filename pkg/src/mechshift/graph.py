"""Directed acyclic graphs over integer-indexed variables.

Vertices are the integers ``0 .. num_vars - 1``; optional names are metadata
only and never affect algorithms. The environment indicator of an augmented
graph lives at the reserved index ``num_vars``.

d-separation is decided by a reachability pass over (vertex, direction)
states, which visits each directed edge at most twice. An exhaustive
path-enumeration check exists in the test suite as an oracle; it is not part
of the library.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .exceptions import CycleError, GraphFormatError

Edge = tuple[int, int]


def _as_edge_set(edges: Iterable[Sequence[int]], num_vars: int) -> frozenset[Edge]:
    out = set()
    for edge in edges:
        i, j = edge
        i, j = int(i), int(j)
        if not (0 <= i < num_vars and 0 <= j < num_vars):
            raise ValueError(f"edge ({i}, {j}) out of range for {num_vars} variables")
        if i == j:
            raise ValueError(f"self loop at vertex {i}")
        out.add((i, j))
    return frozenset(out)


def _check_names(names, num_vars):
    if names is None:
        return None
    names = tuple(str(n) for n in names)
    if len(names) != num_vars:
        raise ValueError(f"expected {num_vars} names, got {len(names)}")
    return names


@dataclass(frozen=True)
class Dag:
    """Immutable labeled DAG.

    Parameters
    ----------
    num_vars : int
        Number of vertices.
    edges : iterable of (i, j)
        Directed edges i -> j. Validated for range and acyclicity.
    names : sequence of str, optional
        Display names, metadata only.
    """

    num_vars: int
    edges: frozenset[Edge]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        object.__setattr__(self, "edges", _as_edge_set(self.edges, self.num_vars))
        object.__setattr__(self, "names", _check_names(self.names, self.num_vars))
        self.topological_order()  # raises CycleError on a cycle

    @cached_property
    def _parent_lists(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.num_vars)]
        for i, j in self.edges:
            out[j].append(i)
        return tuple(tuple(sorted(p)) for p in out)

    @cached_property
    def _child_lists(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.num_vars)]
        for i, j in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(c)) for c in out)

    @property
    def _node_count(self) -> int:
        return self.num_vars

    def parents(self, j: int) -> tuple[int, ...]:
        _check_vertex(j, self.num_vars)
        return self._parent_lists[j]

    def children(self, i: int) -> tuple[int, ...]:
        _check_vertex(i, self.num_vars)
        return self._child_lists[i]

    def topological_order(self) -> tuple[int, ...]:
        """Topological order, smallest index first among ready vertices."""
        indeg = [0] * self.num_vars
        for _, j in self.edges:
            indeg[j] += 1
        ready = [v for v in range(self.num_vars) if indeg[v] == 0]
        heapq.heapify(ready)
        order = []
        children = [[] for _ in range(self.num_vars)]
        for i, j in self.edges:
            children[i].append(j)
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != self.num_vars:
            raise CycleError("edge set contains a directed cycle")
        return tuple(order)

    def relabel(self, perm: Sequence[int]) -> "Dag":
        """Return the DAG with vertex v renamed to perm[v]."""
        perm = list(perm)
        if sorted(perm) != list(range(self.num_vars)):
            raise ValueError("perm must be a permutation of the vertices")
        edges = frozenset((perm[i], perm[j]) for i, j in self.edges)
        names = None
        if self.names is not None:
            inv = [0] * self.num_vars
            for old, new in enumerate(perm):
                inv[new] = old
            names = tuple(self.names[inv[v]] for v in range(self.num_vars))
        return Dag(self.num_vars, edges, names)


@dataclass(frozen=True)
class AugmentedDag:
    """A DAG plus an exogenous environment indicator at index ``base.num_vars``.

    ``env_children`` are the variables whose mechanism differs between the two
    environments encoded by the indicator; each receives an edge from it.
    """

    base: Dag
    env_children: frozenset[int]

    def __post_init__(self):
        children = frozenset(int(v) for v in self.env_children)
        for v in children:
            if not 0 <= v < self.base.num_vars:
                raise ValueError(f"environment child {v} out of range")
        object.__setattr__(self, "env_children", children)

    @property
    def env_index(self) -> int:
        return self.base.num_vars

    @property
    def _node_count(self) -> int:
        return self.base.num_vars + 1

    @cached_property
    def _parent_lists(self) -> tuple[tuple[int, ...], ...]:
        e = self.env_index
        out = []
        for j in range(self.base.num_vars):
            ps = self.base._parent_lists[j]
            out.append(ps + (e,) if j in self.env_children else ps)
        out.append(())
        return tuple(out)

    @cached_property
    def _child_lists(self) -> tuple[tuple[int, ...], ...]:
        out = list(self.base._child_lists)
        out.append(tuple(sorted(self.env_children)))
        return tuple(out)

    def parents(self, j: int) -> tuple[int, ...]:
        _check_vertex(j, self._node_count)
        return self._parent_lists[j]

    def children(self, i: int) -> tuple[int, ...]:
        _check_vertex(i, self._node_count)
        return self._child_lists[i]


@dataclass(frozen=True)
class Cpdag:
    """Partially directed graph: a skeleton with some edges oriented.

    ``undirected`` pairs are stored canonically as (min, max). The directed
    and undirected parts must not overlap.
    """

    num_vars: int
    directed: frozenset[Edge]
    undirected: frozenset[Edge]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        directed = _as_edge_set(self.directed, self.num_vars)
        undirected = frozenset(
            (min(int(i), int(j)), max(int(i), int(j))) for i, j in self.undirected
        )
        for i, j in undirected:
            if not (0 <= i < self.num_vars and 0 <= j < self.num_vars):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if i == j:
                raise ValueError(f"self loop at vertex {i}")
        for i, j in directed:
            pair = (min(i, j), max(i, j))
            if pair in undirected:
                raise ValueError(f"edge {pair} is both directed and undirected")
            if (j, i) in directed:
                raise ValueError(f"edge ({i}, {j}) directed both ways")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        object.__setattr__(self, "names", _check_names(self.names, self.num_vars))

    @cached_property
    def _adjacency(self) -> tuple[frozenset[int], ...]:
        adj = [set() for _ in range(self.num_vars)]
        for i, j in self.directed:
            adj[i].add(j)
            adj[j].add(i)
        for i, j in self.undirected:
            adj[i].add(j)
            adj[j].add(i)
        return tuple(frozenset(a) for a in adj)

    def neighbors(self, v: int) -> frozenset[int]:
        _check_vertex(v, self.num_vars)
        return self._adjacency[v]


def _check_vertex(v: int, n: int) -> None:
    if not isinstance(v, (int,)) or isinstance(v, bool):
        raise ValueError(f"vertex must be an integer, got {v!r}")
    if not 0 <= v < n:
        raise ValueError(f"vertex {v} out of range for {n} vertices")


def skeleton(g: Dag | AugmentedDag | Cpdag) -> frozenset[Edge]:
    """Unordered adjacency pairs of ``g``, each as (min, max)."""
    if isinstance(g, Cpdag):
        pairs = {(min(i, j), max(i, j)) for i, j in g.directed}
        return frozenset(pairs | g.undirected)
    if isinstance(g, AugmentedDag):
        e = g.env_index
        pairs = {(min(i, j), max(i, j)) for i, j in g.base.edges}
        pairs |= {(v, e) for v in g.env_children}
        return frozenset(pairs)
    return frozenset((min(i, j), max(i, j)) for i, j in g.edges)


def v_structures(g: Dag | AugmentedDag) -> frozenset[tuple[int, int, int]]:
    """Collider triples (i, k, j) with i -> k <- j, i < j, i and j non-adjacent."""
    skel = skeleton(g)
    n = g._node_count
    out = set()
    for k in range(n):
        ps = g._parent_lists[k]
        for a in range(len(ps)):
            for b in range(a + 1, len(ps)):
                i, j = ps[a], ps[b]
                if (min(i, j), max(i, j)) not in skel:
                    out.add((i, k, j))
    return frozenset(out)


def d_separated(
    g: Dag | AugmentedDag, a: int, b: int, z: Iterable[int] = ()
) -> bool:
    """True iff ``a`` and ``b`` are d-separated given ``z`` in ``g``.

    A path is blocked by ``z`` exactly when it contains a non-collider in
    ``z`` or a collider without descendants in ``z`` (a vertex counts as its
    own descendant). The traversal below explores (vertex, direction) states
    reachable along active paths from ``a`` and reports whether ``b`` is hit.
    """
    n = g._node_count
    _check_vertex(a, n)
    _check_vertex(b, n)
    if a == b:
        raise ValueError("query endpoints must differ")
    zset = frozenset(int(v) for v in z)
    for v in zset:
        _check_vertex(v, n)
    if a in zset or b in zset:
        raise ValueError("conditioning set must not contain the query endpoints")

    pa = g._parent_lists
    ch = g._child_lists

    # Vertices that are in z or have a descendant in z: colliders open there.
    anc_of_z = set(zset)
    stack = list(zset)
    while stack:
        v = stack.pop()
        for p in pa[v]:
            if p not in anc_of_z:
                anc_of_z.add(p)
                stack.append(p)

    # Direction encodes how the state was entered: UP = from a child (or the
    # start), DOWN = from a parent.
    UP, DOWN = 0, 1
    queue = deque([(a, UP)])
    seen = {(a, UP)}
    while queue:
        v, direction = queue.popleft()
        if v == b:
            return False
        if direction == UP and v not in zset:
            for nxt in pa[v]:
                if (nxt, UP) not in seen:
                    seen.add((nxt, UP))
                    queue.append((nxt, UP))
            for nxt in ch[v]:
                if (nxt, DOWN) not in seen:
                    seen.add((nxt, DOWN))
                    queue.append((nxt, DOWN))
        elif direction == DOWN:
            if v not in zset:
                for nxt in ch[v]:
                    if (nxt, DOWN) not in seen:
                        seen.add((nxt, DOWN))
                        queue.append((nxt, DOWN))
            if v in anc_of_z:
                for nxt in pa[v]:
                    if (nxt, UP) not in seen:
                        seen.add((nxt, UP))
                        queue.append((nxt, UP))
    return True


def serialize_graph(g: Dag | Cpdag) -> str:
    """Serialize to the graph document format.

    The document is JSON with fields ``num_vars``, optional ``names``,
    ``directed``, and (for partially directed graphs only) ``undirected``.
    ``parse_graph(serialize_graph(g)) == g`` holds exactly.
    """
    doc: dict = {"num_vars": g.num_vars}
    if g.names is not None:
        doc["names"] = list(g.names)
    if isinstance(g, Cpdag):
        doc["directed"] = sorted([i, j] for i, j in g.directed)
        doc["undirected"] = sorted([i, j] for i, j in g.undirected)
    elif isinstance(g, Dag):
        doc["directed"] = sorted([i, j] for i, j in g.edges)
    else:
        raise TypeError(f"cannot serialize {type(g).__name__}")
    return json.dumps(doc, indent=2) + "\n"


def parse_graph(text: str) -> Dag | Cpdag:
    """Inverse of :func:`serialize_graph`.

    A document with an ``undirected`` field parses to a partially directed
    graph, otherwise to a DAG.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise GraphFormatError(f"not a valid graph document: {err}") from err
    if not isinstance(doc, dict) or "num_vars" not in doc or "directed" not in doc:
        raise GraphFormatError("graph document needs num_vars and directed fields")
    names = doc.get("names")
    try:
        if "undirected" in doc:
            return Cpdag(doc["num_vars"], doc["directed"], doc["undirected"], names)
        return Dag(doc["num_vars"], doc["directed"], names)
    except (ValueError, CycleError, TypeError) as err:
        raise GraphFormatError(f"invalid graph document: {err}") from err


def write_graph(g: Dag | Cpdag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_graph(g))


def read_graph(path) -> Dag | Cpdag:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())
