import numpy as np
import pytest

from anisodiff.errors import (
    FeatureShapeMismatchError,
    IndexOutOfRangeError,
    IsolatedNodeError,
    SelfLoopError,
)
from anisodiff.graph import build_graph, connected_components, structural_matrices

from conftest import cycle_graph, random_graphs


class TestBuildGraph:
    def test_smallest_valid_graph(self):
        g = build_graph(2, [(0, 1)], [[1.0], [2.0]])
        assert g.node_count == 2
        assert g.edge_count == 1

    def test_symmetrization_dedups_reversed_edges(self):
        g = build_graph(3, [(0, 1), (1, 0), (1, 2)], np.zeros((3, 1)))
        assert g.edge_count == 2
        assert g.edges == ((0, 1), (1, 2))

    def test_isolated_node_rejected(self):
        with pytest.raises(IsolatedNodeError, match="node 2"):
            build_graph(3, [(0, 1)], np.zeros((3, 1)))

    def test_self_loop_rejected(self):
        with pytest.raises(SelfLoopError):
            build_graph(2, [(0, 0), (0, 1)], np.zeros((2, 1)))

    def test_endpoint_out_of_range(self):
        with pytest.raises(IndexOutOfRangeError):
            build_graph(2, [(0, 2)], np.zeros((2, 1)))

    def test_feature_shape_mismatch(self):
        with pytest.raises(FeatureShapeMismatchError):
            build_graph(2, [(0, 1)], np.zeros((3, 1)))

    def test_edge_order_irrelevant(self):
        a = build_graph(4, [(0, 1), (1, 2), (2, 3)], np.zeros((4, 1)))
        b = build_graph(4, [(2, 3), (1, 0), (2, 1)], np.zeros((4, 1)))
        assert a.edges == b.edges

    def test_features_are_read_only(self):
        g = build_graph(2, [(0, 1)], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            g.node_features[0, 0] = 9.0


class TestStructuralMatrices:
    def test_p2_laplacian(self, p2):
        sm = structural_matrices(p2)
        assert sm.laplacian.tolist() == [[1.0, -1.0], [-1.0, 1.0]]

    def test_p3_degree_and_laplacian(self, p3):
        sm = structural_matrices(p3)
        assert np.array_equal(sm.degree, np.diag([1.0, 2.0, 1.0]))
        expected = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]
        assert sm.laplacian.tolist() == expected

    def test_c4_row_sums_and_diagonal(self, c4):
        sm = structural_matrices(c4)
        assert np.array_equal(sm.laplacian.sum(axis=1), np.zeros(4))
        assert np.array_equal(np.diag(sm.laplacian), 2.0 * np.ones(4))

    def test_invariants_on_random_graphs(self):
        ones_residuals = []
        for g, _ in random_graphs(seed=5, count=50):
            sm = structural_matrices(g)
            assert np.array_equal(sm.adjacency, sm.adjacency.T)
            assert np.array_equal(np.diag(sm.degree), sm.adjacency.sum(axis=1))
            ones_residuals.append(np.abs(sm.laplacian.sum(axis=1)).max())
        # integer construction: row sums are exactly zero, not merely small
        assert max(ones_residuals) == 0.0

    def test_determinism_bit_identical(self):
        specs = (5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], np.ones((5, 2)))
        a = structural_matrices(build_graph(*specs))
        b = structural_matrices(build_graph(*specs))
        assert a.laplacian.tobytes() == b.laplacian.tobytes()
        assert a.adjacency.tobytes() == b.adjacency.tobytes()


class TestConnectedComponents:
    def test_path_is_single_component(self, p3):
        assert connected_components(p3) == [{0, 1, 2}]

    def test_two_disjoint_edges(self):
        g = build_graph(4, [(0, 1), (2, 3)], np.zeros((4, 1)))
        assert connected_components(g) == [{0, 1}, {2, 3}]

    def test_c6_single_component(self):
        assert connected_components(cycle_graph(6)) == [set(range(6))]

    def test_partition_on_random_graphs(self):
        for g, _ in random_graphs(seed=6, count=20):
            comps = connected_components(g)
            merged = set()
            for comp in comps:
                assert not merged & comp
                merged |= comp
            assert merged == set(range(g.node_count))
