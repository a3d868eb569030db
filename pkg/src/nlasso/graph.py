"""Empirical graphs, their matrices and the (semi-)norms built on them.

Nodes are dense integer ids ``0..N-1``. Every undirected edge ``{i, j}`` is
stored once, with the canonical orientation ``head = min(i, j)``,
``tail = max(i, j)``. Edge ids are positions in the input edge list.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    ClusterDisconnectedError,
    DisconnectedError,
    DuplicateEdgeError,
    EdgeNotInGraphError,
    EmptySetError,
    GraphError,
    InvalidNodeError,
    NonPositiveWeightError,
    NumericalRankDeficiencyError,
    PartitionError,
    SelfLoopError,
)

# eigenvalues below ZERO_EIG_RTOL * lambda_max count as zero
ZERO_EIG_RTOL = 1e-9


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EmpiricalGraph:
    """Simple, connected, weighted undirected graph.

    Use :func:`build_graph` to construct a validated instance.
    """

    n_nodes: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return _frozen(np.sqrt(self.weights))

    @cached_property
    def edge_index(self) -> dict:
        """Map ``(min(i, j), max(i, j))`` to the edge id."""
        return {(int(h), int(t)): e for e, (h, t) in enumerate(zip(self.heads, self.tails))}

    def edge_id(self, i, j) -> int:
        key = (min(int(i), int(j)), max(int(i), int(j)))
        try:
            return self.edge_index[key]
        except KeyError:
            raise EdgeNotInGraphError(f"edge {{{i}, {j}}} is not in the graph") from None

    def edge_ids(self, edges: Iterable) -> np.ndarray:
        return np.array([self.edge_id(i, j) for i, j in edges], dtype=np.intp)

    def edge_list(self) -> list:
        return [(int(h), int(t), float(w)) for h, t, w in zip(self.heads, self.tails, self.weights)]

    @cached_property
    def max_weight(self) -> float:
        """Supremum norm of the weight matrix."""
        return float(self.weights.max())

    def neighbors(self, i: int) -> np.ndarray:
        a = adjacency(self)
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def __repr__(self):
        return f"EmpiricalGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def build_graph(n_nodes: int, edges: Sequence) -> EmpiricalGraph:
    """Validate an edge list and return an :class:`EmpiricalGraph`.

    Parameters
    ----------
    n_nodes : int
        Number of nodes ``N``; node ids are ``0..N-1``.
    edges : sequence of (i, j, w)
        Undirected edges with strictly positive weights.

    Raises
    ------
    SelfLoopError, DuplicateEdgeError, NonPositiveWeightError,
    InvalidNodeError, DisconnectedError
    """
    n_nodes = int(n_nodes)
    if n_nodes < 1:
        raise GraphError(f"node count must be positive, got {n_nodes}")
    edges = list(edges)
    if not edges:
        raise GraphError("edge list is empty")
    heads = np.empty(len(edges), dtype=np.intp)
    tails = np.empty(len(edges), dtype=np.intp)
    weights = np.empty(len(edges), dtype=float)
    seen = {}
    for e, edge in enumerate(edges):
        if len(edge) != 3:
            raise GraphError(f"edge #{e} must be (i, j, w), got {edge!r}")
        i, j, w = edge
        if int(i) != i or int(j) != j:
            raise InvalidNodeError(f"edge #{e} ({i}, {j}): node ids must be integers")
        i, j, w = int(i), int(j), float(w)
        for node in (i, j):
            if not 0 <= node < n_nodes:
                raise InvalidNodeError(f"edge #{e} ({i}, {j}): node {node} outside 0..{n_nodes - 1}")
        if i == j:
            raise SelfLoopError(f"edge #{e} ({i}, {j}) is a self loop")
        if not (w > 0 and np.isfinite(w)):
            raise NonPositiveWeightError(f"edge #{e} ({i}, {j}) has non-positive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"edge #{e} ({i}, {j}) duplicates edge #{seen[key]}")
        seen[key] = e
        heads[e], tails[e], weights[e] = key[0], key[1], w
    g = EmpiricalGraph(n_nodes, _frozen(heads), _frozen(tails), _frozen(weights))
    n_comp, labels = connected_components(adjacency(g), directed=False)
    if n_comp > 1:
        comps = [np.flatnonzero(labels == c).tolist() for c in range(n_comp)]
        comps.sort(key=len)
        smallest = comps[0]
        shown = smallest if len(smallest) <= 10 else smallest[:10] + ["..."]
        raise DisconnectedError(
            f"graph has {n_comp} connected components; e.g. component {shown} is cut off"
        )
    return g


@dataclass(frozen=True, eq=False)
class Orientation:
    """Head/tail assignment per edge id."""

    heads: np.ndarray
    tails: np.ndarray

    def flipped(self, mask) -> "Orientation":
        """Swap head and tail on the edges selected by the boolean ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        return Orientation(
            _frozen(np.where(mask, self.tails, self.heads)),
            _frozen(np.where(mask, self.heads, self.tails)),
        )


def canonical_orientation(g: EmpiricalGraph) -> Orientation:
    """Lower node id is the head of every edge."""
    return Orientation(g.heads, g.tails)


def _check_orientation(g, o):
    if o is None:
        return canonical_orientation(g)
    if len(o.heads) != g.n_edges:
        raise GraphError("orientation does not match the graph's edge count")
    lo = np.minimum(o.heads, o.tails)
    hi = np.maximum(o.heads, o.tails)
    if not (np.array_equal(lo, g.heads) and np.array_equal(hi, g.tails)):
        raise GraphError("orientation does not belong to this graph")
    return o


def incidence_matrix(g: EmpiricalGraph, orientation: Orientation | None = None) -> sp.csr_matrix:
    """Sparse ``|E| x N`` incidence matrix with ``+sqrt(W_e)`` at the head."""
    o = _check_orientation(g, orientation)
    m = g.n_edges
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([o.heads, o.tails]).ravel()
    vals = np.column_stack([g.sqrt_weights, -g.sqrt_weights]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, g.n_nodes))


def adjacency(g: EmpiricalGraph) -> sp.csr_matrix:
    """Symmetric sparse weight matrix ``W``."""
    rows = np.concatenate([g.heads, g.tails])
    cols = np.concatenate([g.tails, g.heads])
    vals = np.concatenate([g.weights, g.weights])
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.n_nodes, g.n_nodes))


def degrees(g: EmpiricalGraph) -> np.ndarray:
    """Weighted node degrees ``d_i = sum_j W_ij``."""
    return np.bincount(g.heads, g.weights, g.n_nodes) + np.bincount(g.tails, g.weights, g.n_nodes)


def laplacian(g: EmpiricalGraph) -> sp.csr_matrix:
    """Graph Laplacian ``L = diag(d) - W``."""
    return (sp.diags(degrees(g)) - adjacency(g)).tocsr()


def _gap_from_laplacian(lap: np.ndarray) -> float:
    eigs = scipy.linalg.eigvalsh(lap)
    scale = max(eigs[-1], 1.0)
    if eigs[1] <= ZERO_EIG_RTOL * scale:
        raise DisconnectedError(
            f"second-smallest Laplacian eigenvalue {eigs[1]:.3e} is numerically zero"
        )
    return float(eigs[1])


def spectral_gap(g: EmpiricalGraph) -> float:
    """Second-smallest eigenvalue of the Laplacian (dense eigensolve)."""
    if g.n_nodes == 1:
        return float("inf")
    return _gap_from_laplacian(laplacian(g).toarray())


def induced_subgraph(g: EmpiricalGraph, nodes) -> tuple[EmpiricalGraph | None, np.ndarray, np.ndarray]:
    """Subgraph induced by ``nodes``.

    Returns ``(subgraph, nodes, edge_ids)`` where ``nodes[k]`` is the original
    id of local node ``k`` and ``edge_ids`` are the original ids of the kept
    edges, in the subgraph's edge order. ``subgraph`` is ``None`` for a single
    node. Raises :class:`DisconnectedError` if the induced graph is disconnected.
    """
    nodes = np.unique(np.asarray(nodes, dtype=np.intp))
    local = np.full(g.n_nodes, -1, dtype=np.intp)
    local[nodes] = np.arange(len(nodes))
    keep = np.flatnonzero((local[g.heads] >= 0) & (local[g.tails] >= 0))
    if len(nodes) == 1:
        return None, nodes, keep
    if len(keep) == 0:
        raise DisconnectedError(f"nodes {nodes.tolist()} share no edges")
    sub = build_graph(
        len(nodes),
        zip(local[g.heads[keep]].tolist(), local[g.tails[keep]].tolist(), g.weights[keep].tolist()),
    )
    return sub, nodes, keep


class Partition:
    """Disjoint clusters covering every node of a graph.

    Use :func:`make_partition`; it validates coverage and cluster connectivity.

    Attributes
    ----------
    clusters : list of ndarray
        Sorted node ids of each cluster.
    labels : ndarray
        Cluster index of each node.
    boundary_mask : ndarray of bool
        ``True`` for edges whose endpoints lie in different clusters.
    """

    def __init__(self, g: EmpiricalGraph, clusters, labels):
        self.graph = g
        self.clusters = [_frozen(c) for c in clusters]
        self.labels = _frozen(labels)
        self.boundary_mask = _frozen(labels[g.heads] != labels[g.tails])

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def boundary(self) -> np.ndarray:
        """Edge ids of the cluster boundary."""
        return np.flatnonzero(self.boundary_mask)

    @property
    def interior(self) -> np.ndarray:
        """Edge ids of intra-cluster edges."""
        return np.flatnonzero(~self.boundary_mask)

    def boundary_edges(self) -> list:
        g = self.graph
        return [(int(g.heads[e]), int(g.tails[e])) for e in self.boundary]

    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters])

    def incident_boundary(self, cluster: int) -> np.ndarray:
        """Boundary edge ids with exactly one endpoint in ``cluster``."""
        g = self.graph
        touches = (self.labels[g.heads] == cluster) | (self.labels[g.tails] == cluster)
        return np.flatnonzero(touches & self.boundary_mask)

    def __repr__(self):
        return f"Partition(sizes={self.cluster_sizes().tolist()}, boundary={int(self.boundary_mask.sum())})"


def make_partition(g: EmpiricalGraph, clusters) -> Partition:
    """Build a :class:`Partition` of ``g`` from lists of node ids."""
    labels = np.full(g.n_nodes, -1, dtype=np.intp)
    out = []
    for ci, c in enumerate(clusters):
        c = np.asarray(sorted(int(i) for i in c), dtype=np.intp)
        if len(c) == 0:
            raise PartitionError(f"cluster {ci} is empty")
        if c[0] < 0 or c[-1] >= g.n_nodes:
            raise PartitionError(f"cluster {ci} references a node outside 0..{g.n_nodes - 1}")
        if np.any(np.diff(c) == 0):
            raise PartitionError(f"cluster {ci} lists a node twice")
        clash = c[labels[c] >= 0]
        if len(clash):
            raise PartitionError(
                f"node {int(clash[0])} is in clusters {int(labels[clash[0]])} and {ci}"
            )
        labels[c] = ci
        out.append(c)
    missing = np.flatnonzero(labels < 0)
    if len(missing):
        raise PartitionError(f"nodes {missing[:10].tolist()} are not covered by any cluster")
    for ci, c in enumerate(out):
        try:
            induced_subgraph(g, c)
        except DisconnectedError:
            raise ClusterDisconnectedError(ci) from None
    return Partition(g, out, labels)


def partition_from_labels(g: EmpiricalGraph, labels) -> Partition:
    labels = np.asarray(labels, dtype=np.intp)
    return make_partition(g, [np.flatnonzero(labels == c) for c in range(labels.max() + 1)])


def cluster_spectral_gaps(g: EmpiricalGraph, p: Partition) -> np.ndarray:
    """Spectral gap of each cluster's induced subgraph (``inf`` for singletons)."""
    gaps = []
    for ci, c in enumerate(p.clusters):
        if len(c) == 1:
            gaps.append(np.inf)
            continue
        try:
            sub, _, _ = induced_subgraph(g, c)
            gaps.append(spectral_gap(sub))
        except DisconnectedError:
            raise ClusterDisconnectedError(ci) from None
    return np.array(gaps)


def partition_spectral_gap(g: EmpiricalGraph, p: Partition) -> float:
    """Smallest spectral gap over the clusters' induced subgraphs."""
    return float(cluster_spectral_gaps(g, p).min())


def _signal(g, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n_nodes,):
        raise ValueError(f"signal has shape {x.shape}, expected ({g.n_nodes},)")
    return x


def edge_variations(g: EmpiricalGraph, x) -> np.ndarray:
    """Per-edge terms ``sqrt(W_ij) |x_j - x_i|``."""
    x = _signal(g, x)
    return g.sqrt_weights * np.abs(x[g.tails] - x[g.heads])


def tv_norm(g: EmpiricalGraph, x) -> float:
    """Weighted total variation ``sum_{ij in E} sqrt(W_ij) |x_j - x_i|``."""
    return float(edge_variations(g, x).sum())


def tv_norm_subset(g: EmpiricalGraph, x, edges) -> float:
    """Total variation restricted to the edges ``{i, j}`` listed in ``edges``."""
    ids = g.edge_ids(edges)
    return float(edge_variations(g, x)[ids].sum())


def tv_norm_edges(g: EmpiricalGraph, x, edge_ids) -> float:
    """Total variation over the given edge ids (or a boolean edge mask)."""
    return float(edge_variations(g, x)[edge_ids].sum())


def node_norm(x, nodes) -> float:
    """Root mean square of ``x`` over the node set ``nodes``."""
    nodes = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.intp)
    if nodes.size == 0:
        raise EmptySetError("node set is empty")
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x[nodes] ** 2)))


def incidence_pseudoinverse(g: EmpiricalGraph, orientation: Orientation | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of the incidence matrix, via SVD.

    Returns a dense ``N x |E|`` matrix. Its columns are checked against the
    bound ``||s_j|| <= sqrt(2 max W) / spectral_gap``.
    """
    d = incidence_matrix(g, orientation).toarray()
    u, s, vt = scipy.linalg.svd(d, full_matrices=False)
    cutoff = ZERO_EIG_RTOL * max(s[0], 1.0)
    rank = int(np.sum(s > cutoff))
    if rank != g.n_nodes - 1:
        raise NumericalRankDeficiencyError(
            f"incidence matrix has numerical rank {rank}, expected {g.n_nodes - 1}"
        )
    pinv = (vt[:rank].T / s[:rank]) @ u[:, :rank].T
    bound = np.sqrt(2 * g.max_weight) / spectral_gap(g)
    worst = np.linalg.norm(pinv, axis=0).max()
    if worst > bound * (1 + 1e-8):
        raise NumericalRankDeficiencyError(
            f"pseudo-inverse column norm {worst:.6g} exceeds bound {bound:.6g}"
        )
    return pinv
