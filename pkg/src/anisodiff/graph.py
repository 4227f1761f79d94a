"""Immutable undirected graphs with node features and derived structural matrices.

Graphs are validated once at construction: contiguous 0-based node indices,
no self-loops, no duplicate edges, no isolated nodes (the degree matrix must
stay invertible). Storage is dense; target graphs are molecule-sized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FeatureShapeMismatchError,
    IndexOutOfRangeError,
    IsolatedNodeError,
    SelfLoopError,
)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected graph with per-node feature rows.

    ``edges`` holds each undirected edge once as a sorted ``(i, j)`` pair,
    in lexicographic order; ``node_features`` is an ``(n, d)`` read-only
    float array.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    node_features: np.ndarray

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbor_lists(self) -> list[np.ndarray]:
        """Sorted neighbor index array per node."""
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [np.array(sorted(v), dtype=np.int64) for v in nbrs]


@dataclass(frozen=True)
class StructuralMatrices:
    """Dense adjacency A, degree D, and Laplacian L = D - A for one graph."""

    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Degree diagonal as a vector."""
        return np.diag(self.degree)


def build_graph(node_count: int, edge_list, features) -> Graph:
    """Validate and canonicalize a graph description.

    The edge list is deduplicated and symmetrized: ``(i, j)`` and ``(j, i)``
    denote the same undirected edge. Raises ``IndexOutOfRangeError``,
    ``SelfLoopError``, ``IsolatedNodeError`` or ``FeatureShapeMismatchError``
    on invalid input.
    """
    node_count = int(node_count)
    if node_count < 1:
        raise IndexOutOfRangeError(f"node_count must be >= 1, got {node_count}")

    feats = np.array(features, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats.reshape(-1, 1)
    if feats.ndim != 2 or feats.shape[0] != node_count:
        raise FeatureShapeMismatchError(
            f"features must have {node_count} rows, got shape {feats.shape}"
        )

    canon: set[tuple[int, int]] = set()
    for pair in edge_list:
        i, j = int(pair[0]), int(pair[1])
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise IndexOutOfRangeError(
                f"edge ({i}, {j}) has an endpoint outside [0, {node_count})"
            )
        if i == j:
            raise SelfLoopError(f"self-loop at node {i}")
        canon.add((min(i, j), max(i, j)))

    deg = np.zeros(node_count, dtype=np.int64)
    for i, j in canon:
        deg[i] += 1
        deg[j] += 1
    isolated = np.flatnonzero(deg == 0)
    if isolated.size:
        raise IsolatedNodeError(f"node {int(isolated[0])} has degree 0")

    return Graph(
        node_count=node_count,
        edges=tuple(sorted(canon)),
        node_features=_freeze(feats),
    )


def structural_matrices(g: Graph) -> StructuralMatrices:
    """A, D and L for a validated graph.

    Built in integer arithmetic so L row sums are exactly zero, then cast
    to float64.
    """
    n = g.node_count
    adj = np.zeros((n, n), dtype=np.int64)
    for i, j in g.edges:
        adj[i, j] = 1
        adj[j, i] = 1
    deg = np.diag(adj.sum(axis=1))
    lap = deg - adj
    return StructuralMatrices(
        adjacency=_freeze(adj.astype(np.float64)),
        degree=_freeze(deg.astype(np.float64)),
        laplacian=_freeze(lap.astype(np.float64)),
    )


def connected_components(g: Graph) -> list[set[int]]:
    """Partition of node indices by connectivity, ordered by smallest member."""
    nbrs = g.neighbor_lists()
    unseen = set(range(g.node_count))
    components: list[set[int]] = []
    while unseen:
        root = min(unseen)
        comp = {root}
        frontier = [root]
        unseen.discard(root)
        while frontier:
            u = frontier.pop()
            for v in nbrs[u]:
                v = int(v)
                if v in unseen:
                    unseen.discard(v)
                    comp.add(v)
                    frontier.append(v)
        components.append(comp)
    return components
