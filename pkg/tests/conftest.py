"""Shared graph fixtures and helpers."""
import numpy as np
import pytest

from anisodiff.dataset import random_connected_graph
from anisodiff.graph import build_graph


def path_graph(n, feature_dim=1):
    edges = [(i, i + 1) for i in range(n - 1)]
    return build_graph(n, edges, np.zeros((n, feature_dim)))


def cycle_graph(n, feature_dim=1):
    edges = [(i, (i + 1) % n) for i in range(n)]
    return build_graph(n, edges, np.zeros((n, feature_dim)))


@pytest.fixture
def p2():
    return path_graph(2)


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def c4():
    return cycle_graph(4)


def random_graphs(seed, count, min_nodes=4, max_nodes=12, feature_dim=1):
    """Deterministic stream of random connected graphs for property sweeps."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        yield random_connected_graph(rng, n, feature_dim=feature_dim), rng
