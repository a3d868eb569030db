import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlasso.errors import (
    ClusterDisconnectedError,
    DisconnectedError,
    DuplicateEdgeError,
    EdgeNotInGraphError,
    EmptySetError,
    InvalidNodeError,
    NonPositiveWeightError,
    PartitionError,
    SelfLoopError,
)
from nlasso.graph import (
    build_graph,
    canonical_orientation,
    degrees,
    incidence_matrix,
    incidence_pseudoinverse,
    laplacian,
    make_partition,
    node_norm,
    partition_spectral_gap,
    spectral_gap,
    tv_norm,
    tv_norm_edges,
    tv_norm_subset,
)

from conftest import connected_graphs
from oracles import fiedler_value, incidence_dense, laplacian_dense, pinv_svd_free, tv_loop


def complete(n, w=1.0):
    return [(i, j, w) for i in range(n) for j in range(i + 1, n)]


BARBELL = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)]


class TestBuildGraph:
    def test_minimal(self):
        g = build_graph(2, [(0, 1, 1.0)])
        assert g.n_nodes == 2 and g.n_edges == 1

    @pytest.mark.parametrize(
        "n, edges, err",
        [
            (3, [(0, 1, 1.0), (1, 1, 2.0)], SelfLoopError),
            (4, [(0, 1, 1.0), (2, 3, 1.0)], DisconnectedError),
            (2, [(0, 1, 1.0), (1, 0, 2.0)], DuplicateEdgeError),
            (2, [(0, 1, 0.0)], NonPositiveWeightError),
            (2, [(0, 1, -1.0)], NonPositiveWeightError),
            (2, [(0, 2, 1.0)], InvalidNodeError),
        ],
    )
    def test_rejects(self, n, edges, err):
        with pytest.raises(err):
            build_graph(n, edges)

    def test_disconnected_message_names_component(self):
        with pytest.raises(DisconnectedError, match=r"\[3\]"):
            build_graph(4, [(0, 1, 1.0), (1, 2, 1.0)])

    def test_edge_lookup(self):
        g = build_graph(3, [(2, 0, 1.5), (1, 2, 1.0)])
        assert g.edge_id(0, 2) == g.edge_id(2, 0) == 0
        with pytest.raises(EdgeNotInGraphError):
            g.edge_id(0, 1)


class TestOrientation:
    def test_lower_id_is_head(self):
        g = build_graph(6, [(0, 1, 1.0), (5, 2, 1.0), (1, 2, 1.0), (3, 4, 1.0), (2, 3, 1.0)])
        o = canonical_orientation(g)
        assert (o.heads[0], o.tails[0]) == (0, 1)
        assert (o.heads[1], o.tails[1]) == (2, 5)

    def test_deterministic(self):
        edges = [(1, 0, 1.0), (2, 1, 2.0)]
        a = canonical_orientation(build_graph(3, edges))
        b = canonical_orientation(build_graph(3, edges))
        assert np.array_equal(a.heads, b.heads) and np.array_equal(a.tails, b.tails)


class TestMatrices:
    def test_incidence_two_nodes(self):
        D = incidence_matrix(build_graph(2, [(0, 1, 4.0)])).toarray()
        assert np.array_equal(D, [[2.0, -2.0]])

    def test_triangle_factorisation(self):
        edges = complete(3)
        g = build_graph(3, edges)
        D = incidence_matrix(g).toarray()
        assert np.allclose(D.T @ D, laplacian_dense(3, edges), atol=1e-14)

    def test_laplacian_small(self):
        assert np.array_equal(laplacian(build_graph(2, [(0, 1, 1.0)])).toarray(), [[1, -1], [-1, 1]])
        assert np.all(np.diag(laplacian(build_graph(4, complete(4))).toarray()) == 3)

    @given(connected_graphs(max_nodes=15))
    def test_against_loop_oracles(self, ge):
        g, edges = ge
        D = incidence_matrix(g).toarray()
        assert np.array_equal(D, incidence_dense(g.n_nodes, edges))
        L = laplacian(g).toarray()
        assert np.allclose(L, laplacian_dense(g.n_nodes, edges), atol=1e-12)
        assert np.abs(L.sum(axis=1)).max() <= 1e-12
        assert np.abs(D @ np.ones(g.n_nodes)).max() <= 1e-12
        assert np.linalg.norm(L - D.T @ D) <= 1e-10 * np.linalg.norm(L)
        assert np.allclose(degrees(g), np.diag(L))

    @given(connected_graphs(max_nodes=10))
    def test_nonzero_spectra_agree(self, ge):
        g, _ = ge
        D = incidence_matrix(g).toarray()
        a = np.sort(np.linalg.eigvalsh(D @ D.T))
        b = np.sort(np.linalg.eigvalsh(laplacian(g).toarray()))
        tol = 1e-9 * max(1.0, b[-1])
        assert np.allclose(a[a > tol], b[b > tol], atol=tol)


class TestSpectralGap:
    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_complete(self, n):
        assert spectral_gap(build_graph(n, complete(n))) == pytest.approx(n, rel=1e-12)

    def test_barbell_matches_explicit_laplacian(self):
        L = np.array(
            [
                [2, -1, -1, 0, 0, 0],
                [-1, 2, -1, 0, 0, 0],
                [-1, -1, 3, -1, 0, 0],
                [0, 0, -1, 3, -1, -1],
                [0, 0, 0, -1, 2, -1],
                [0, 0, 0, -1, -1, 2],
            ],
            dtype=float,
        )
        assert spectral_gap(build_graph(6, BARBELL)) == pytest.approx(np.linalg.eigvalsh(L)[1], rel=1e-12)

    def test_partition_gaps(self):
        g = build_graph(6, BARBELL)
        whole = make_partition(g, [range(6)])
        assert partition_spectral_gap(g, whole) == pytest.approx(spectral_gap(g))
        assert partition_spectral_gap(g, make_partition(g, [[0, 1, 2], [3, 4, 5]])) == pytest.approx(3.0)
        # K4 on 0..3 and a path 4-5-6, joined by one edge
        edges = complete(4) + [(4, 5, 1.0), (5, 6, 1.0), (3, 4, 1.0)]
        g2 = build_graph(7, edges)
        gap = partition_spectral_gap(g2, make_partition(g2, [[0, 1, 2, 3], [4, 5, 6]]))
        assert gap == pytest.approx(min(fiedler_value(4, complete(4)), fiedler_value(3, [(0, 1, 1.0), (1, 2, 1.0)])))
        assert gap == pytest.approx(1.0)

    @given(connected_graphs(max_nodes=15))
    def test_oracle(self, ge):
        g, edges = ge
        assert spectral_gap(g) == pytest.approx(fiedler_value(g.n_nodes, edges), rel=1e-9)


class TestPartition:
    def test_boundary(self):
        g = build_graph(6, BARBELL)
        p = make_partition(g, [[0, 1, 2], [3, 4, 5]])
        assert p.boundary_edges() == [(2, 3)]

    def test_disconnected_cluster(self):
        g = build_graph(6, BARBELL)
        with pytest.raises(ClusterDisconnectedError) as info:
            make_partition(g, [[0, 1, 4], [2, 3, 5]])
        assert info.value.cluster == 0

    @pytest.mark.parametrize("clusters", [[[0, 1, 2], [3, 4]], [[0, 1, 2], [2, 3, 4, 5]], [[0, 1, 2, 3, 4, 5], []]])
    def test_invalid(self, clusters):
        with pytest.raises(PartitionError):
            make_partition(build_graph(6, BARBELL), clusters)


class TestNorms:
    def test_path_tv(self, path3):
        assert tv_norm(path3, [0, 1, 3]) == 3.0
        assert tv_norm(path3, [2, 2, 2]) == 0.0

    def test_subset(self, path3):
        x = np.array([0.0, 1.0, 3.0])
        assert tv_norm_subset(path3, x, [(0, 1), (1, 2)]) == tv_norm(path3, x)
        assert tv_norm_subset(path3, x, []) == 0.0
        with pytest.raises(EdgeNotInGraphError):
            tv_norm_subset(path3, x, [(0, 2)])

    @given(connected_graphs(), st.integers(0, 2**32 - 1))
    def test_decomposition_and_orientation(self, ge, seed):
        g, edges = ge
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(g.n_nodes)
        mask = rng.random(g.n_edges) < 0.5
        total = tv_norm(g, x)
        assert tv_norm_edges(g, x, mask) + tv_norm_edges(g, x, ~mask) == pytest.approx(total, rel=1e-15, abs=1e-15)
        flipped = canonical_orientation(g).flipped(mask)
        D = incidence_matrix(g, flipped).toarray()
        assert np.abs(D @ x).sum() == pytest.approx(np.abs(incidence_matrix(g).toarray() @ x).sum(), rel=1e-14)
        assert total == pytest.approx(tv_loop(edges, x), rel=1e-12, abs=1e-14)

    def test_node_norm(self):
        assert node_norm([3.0, 4.0], [0, 1]) == pytest.approx(math.sqrt(12.5))
        assert node_norm([-2.0] * 5, [1, 3]) == 2.0
        assert node_norm([1.0, -7.0], [1]) == 7.0
        with pytest.raises(EmptySetError):
            node_norm([1.0], [])


class TestPseudoInverse:
    def test_two_nodes(self, two_nodes):
        P = incidence_pseudoinverse(two_nodes)
        assert np.allclose(P, np.array([[1.0], [-1.0]]) / 2)
        assert np.linalg.norm(P[:, 0]) == pytest.approx(math.sqrt(2) / 2)

    @given(connected_graphs(max_nodes=15))
    def test_identities(self, ge):
        g, edges = ge
        n = g.n_nodes
        P = incidence_pseudoinverse(g)
        D = incidence_matrix(g).toarray()
        assert np.abs(P @ D - (np.eye(n) - np.ones((n, n)) / n)).max() <= 1e-9
        assert np.allclose(P, pinv_svd_free(n, edges), atol=1e-9)
        bound = math.sqrt(2 * max(w for *_, w in edges)) / fiedler_value(n, edges)
        assert np.linalg.norm(P, axis=0).max() <= bound * (1 + 1e-9)
