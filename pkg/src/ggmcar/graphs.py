"""Undirected labeled graphs, free-element index sets, and vertex relabeling.

Vertices are 0-based internally; file formats use 1-based labels. Edges are
stored canonically as sorted (i, j) pairs with i < j, and the free index set
is emitted in lexicographic order — an ordering contract the completion and
sampling modules rely on. Graph equality is labeled equality; there are no
isomorphism checks anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class Graph:
    """Immutable undirected graph on ``p`` vertices."""

    __slots__ = ("p", "edges", "_adj")

    def __init__(self, p: int, edges=()):
        p = int(p)
        if p < 1:
            raise ConfigError(f"vertex count must be >= 1, got {p}")
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ConfigError(f"self-loop at vertex {i + 1}")
            if not (0 <= i < p and 0 <= j < p):
                raise ConfigError(f"edge ({i + 1}, {j + 1}) out of range for p={p}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        adj = np.zeros((p, p), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        adj.setflags(write=False)
        object.__setattr__(self, "_adj", adj)

    def __setattr__(self, name, value):
        raise AttributeError("Graph is immutable")

    @classmethod
    def from_pairs_1based(cls, p: int, pairs) -> "Graph":
        return cls(p, [(i - 1, j - 1) for i, j in pairs])

    @classmethod
    def complete(cls, p: int) -> "Graph":
        return cls(p, [(i, j) for i in range(p) for j in range(i + 1, p)])

    @classmethod
    def cycle(cls, p: int) -> "Graph":
        return cls(p, [(i, (i + 1) % p) for i in range(p)])

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_pairs(self) -> int:
        return self.p * (self.p - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def adjacency(self) -> np.ndarray:
        """Read-only boolean adjacency matrix."""
        return self._adj

    def absent_edges(self):
        """Vertex pairs (i < j) not in the edge set, lexicographic order."""
        return [
            (i, j)
            for i in range(self.p)
            for j in range(i + 1, self.p)
            if not self._adj[i, j]
        ]

    def add_edge(self, i: int, j: int) -> "Graph":
        return Graph(self.p, self.edges + ((min(i, j), max(i, j)),))

    def remove_edge(self, i: int, j: int) -> "Graph":
        e = (min(i, j), max(i, j))
        return Graph(self.p, tuple(x for x in self.edges if x != e))

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._adj[i])

    def degree(self, i: int) -> int:
        return int(self._adj[i].sum())

    def key(self):
        """Hashable identity of the labeled graph."""
        return (self.p, self.edges)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Graph(p={self.p}, edges={[(i + 1, j + 1) for i, j in self.edges]})"


@dataclass(frozen=True)
class FreeIndexSet:
    """The free positions of the upper-triangular factor: diagonal plus edges.

    ``pairs`` is in lexicographic order. ``v[i]`` counts edges (i, j) with
    j > i, ``d[i]`` counts edges (j, i) with j < i; v[i] + d[i] is the degree.
    """

    pairs: tuple
    v: np.ndarray
    d: np.ndarray

    @property
    def size(self) -> int:
        return len(self.pairs)


def free_index_set(graph: Graph) -> FreeIndexSet:
    p = graph.p
    v = np.zeros(p, dtype=np.int64)
    d = np.zeros(p, dtype=np.int64)
    for i, j in graph.edges:
        v[i] += 1
        d[j] += 1
    pairs = sorted([(i, i) for i in range(p)] + list(graph.edges))
    return FreeIndexSet(pairs=tuple(pairs), v=v, d=d)


def free_mask(graph: Graph) -> np.ndarray:
    """Boolean p x p mask of the free upper-triangular positions."""
    m = np.zeros((graph.p, graph.p), dtype=bool)
    np.fill_diagonal(m, True)
    for i, j in graph.edges:
        m[i, j] = True
    return m


def neighborhoods(graph: Graph):
    """One-edge-move targets: (edges that can be added, edges that can be deleted).

    The two lists partition the vertex pairs: every (i, j), i < j, appears in
    exactly one of them.
    """
    return graph.absent_edges(), list(graph.edges)


@dataclass(frozen=True)
class VertexOrdering:
    """A reordering of the vertices.

    ``order[k]`` is the old label occupying position k after the reordering,
    so the new label of old vertex i is ``order.index(i)``. Relabeling a graph
    and permuting a matrix with the same ordering keep the two consistent.
    """

    order: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.order, dtype=np.int64)
        if sorted(arr.tolist()) != list(range(len(arr))):
            raise ConfigError("ordering is not a permutation")
        arr.setflags(write=False)
        object.__setattr__(self, "order", arr)

    @property
    def p(self) -> int:
        return len(self.order)

    def new_labels(self) -> np.ndarray:
        """Array mapping old label -> new label."""
        inv = np.empty(self.p, dtype=np.int64)
        inv[self.order] = np.arange(self.p)
        return inv

    def inverse(self) -> "VertexOrdering":
        return VertexOrdering(self.new_labels())


def identity_ordering(p: int) -> VertexOrdering:
    return VertexOrdering(np.arange(p))


def random_ordering(p: int, fix_first: bool, rng: np.random.Generator) -> VertexOrdering:
    """Uniform random ordering; with ``fix_first`` vertex 0 stays in front."""
    if p < 1:
        raise ConfigError(f"vertex count must be >= 1, got {p}")
    if fix_first:
        rest = rng.permutation(p - 1) + 1 if p > 1 else np.empty(0, dtype=np.int64)
        order = np.concatenate(([0], rest)).astype(np.int64)
    else:
        order = rng.permutation(p).astype(np.int64)
    return VertexOrdering(order)


def relabel(graph: Graph, ordering: VertexOrdering) -> Graph:
    """Graph under the new labeling induced by ``ordering``."""
    if ordering.p != graph.p:
        raise ConfigError(
            f"ordering size {ordering.p} does not match graph size {graph.p}"
        )
    inv = ordering.new_labels()
    return Graph(graph.p, [(inv[i], inv[j]) for i, j in graph.edges])


def permute_matrix(m: np.ndarray, ordering: VertexOrdering) -> np.ndarray:
    """Reorder rows and columns so position k holds old index order[k]."""
    o = ordering.order
    return m[np.ix_(o, o)]


def unpermute_matrix(m: np.ndarray, ordering: VertexOrdering) -> np.ndarray:
    inv = ordering.new_labels()
    return m[np.ix_(inv, inv)]


def read_edge_list(path, p: int) -> Graph:
    """Parse a plain-text edge list: one 1-based "i j" pair per line.

    Blank lines and lines starting with '#' are ignored.
    """
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-integer vertex label") from exc
            if not (1 <= i <= p and 1 <= j <= p):
                raise ConfigError(f"{path}:{lineno}: vertex out of range 1..{p}")
            if i == j:
                raise ConfigError(f"{path}:{lineno}: self-loop at vertex {i}")
            pairs.append((i, j))
    return Graph.from_pairs_1based(p, pairs)


def write_edge_list(path, graph: Graph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in graph.edges:
            fh.write(f"{i + 1} {j + 1}\n")
