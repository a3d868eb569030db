"""Flow-based certification of training sets.

A training set ``M`` resolves a partition with constants ``(K, L)`` when, for
every sign pattern ``b`` on the boundary edges, there is a flow that carries
``b_e * L * sqrt(W_e)`` across each boundary edge ``e`` (head to tail),
respects ``|h| <= sqrt(W)`` on intra-cluster edges, and whose net outflow at
each node is a demand ``f_i`` with ``|f_i| <= K/|M|`` on ``M`` and ``0``
elsewhere.

Boundary flows are fixed by ``(b, L)``, so the question splits into one
independent problem per cluster over the signs of that cluster's incident
boundary edges. A single pattern is checked by a max-flow; all patterns of a
cluster at once by one min-cut (:func:`cluster_all_patterns_feasible`), since
every pattern is feasible iff for every node set ``A`` inside the cluster::

    L * beta(A) <= cut(A) + (K/|M|) * |A & M|

where ``beta(A)`` sums ``sqrt(W_e)`` over boundary edges touching ``A``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import LTooSmallError, NoFeasibleLError, PatternBudgetExceeded
from .graph import EmpiricalGraph, Partition
from .maxflow import FlowNetwork

SATURATION_TOL = 1e-9
ENUMERATION_LIMIT = 16
SAMPLED_PATTERNS = 20_000


def _training_nodes(g, nodes):
    nodes = np.unique(np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.intp))
    if nodes.size == 0:
        raise ValueError("training set must be nonempty")
    if nodes[0] < 0 or nodes[-1] >= g.n_nodes:
        raise ValueError("training set references nodes outside the graph")
    return nodes


def _check_constants(K, L):
    if not (K > 0 and L > 0):
        raise ValueError(f"K and L must be positive, got K={K}, L={L}")


@dataclass
class ClusterFlowProblem:
    """Flow data of one cluster.

    ``boundary`` lists incident boundary edge ids; ``boundary_sign[k]`` is
    ``+1`` if the cluster node of ``boundary[k]`` is the edge's head and
    ``-1`` if it is the tail. A fixed head-to-tail flow ``b L sqrt(W)`` then
    leaves the cluster through that node as ``boundary_sign * b * L * sqrt(W)``.
    """

    cluster: int
    nodes: np.ndarray
    intra: np.ndarray  # (k, 3) local head, local tail, capacity sqrt(W)
    boundary: np.ndarray
    boundary_node: np.ndarray  # local index of the cluster endpoint
    boundary_sign: np.ndarray
    boundary_cap: np.ndarray  # sqrt(W_e)
    in_training: np.ndarray  # bool per local node

    @property
    def n_patterns_log2(self) -> int:
        return len(self.boundary)


def cluster_problem(g: EmpiricalGraph, p: Partition, cluster: int, training) -> ClusterFlowProblem:
    nodes = p.clusters[cluster]
    local = np.full(g.n_nodes, -1, dtype=np.intp)
    local[nodes] = np.arange(len(nodes))
    lh, lt = local[g.heads], local[g.tails]
    intra_ids = np.flatnonzero((lh >= 0) & (lt >= 0))
    intra = np.column_stack([lh[intra_ids], lt[intra_ids], g.sqrt_weights[intra_ids]])
    bnd = p.incident_boundary(cluster)
    head_inside = lh[bnd] >= 0
    bnode = np.where(head_inside, lh[bnd], lt[bnd])
    bsign = np.where(head_inside, 1.0, -1.0)
    in_m = np.zeros(len(nodes), dtype=bool)
    tm = local[np.asarray(training, dtype=np.intp)]
    in_m[tm[tm >= 0]] = True
    return ClusterFlowProblem(cluster, nodes, intra, bnd, bnode, bsign, g.sqrt_weights[bnd], in_m)


def _add_intra(net, prob):
    for h, t, c in prob.intra:
        net.add_arc(int(h), int(t), c, c)


def pattern_feasible(prob: ClusterFlowProblem, signs, K: float, L: float, n_train: int) -> bool:
    """Max-flow feasibility of one sign pattern on one cluster.

    The fixed boundary flux becomes a supply (super-source arc) or demand
    (super-sink arc) at its cluster node. The adjustable demands
    ``|f_i| <= K/M`` are routed through a reservoir node joined to every
    training node by a two-way arc of capacity ``K/M``; the reservoir's own
    imbalance, which equals the total boundary outflow, is attached to the
    source or the sink. Feasible iff the maximum flow saturates every source arc.
    """
    n = len(prob.nodes)
    signs = np.asarray(signs, dtype=float)
    # net outflow through the boundary at each cluster node
    out = np.zeros(n)
    np.add.at(out, prob.boundary_node, prob.boundary_sign * signs * L * prob.boundary_cap)
    supply = -out
    res, src, snk = n, n + 1, n + 2
    net = FlowNetwork(n + 3)
    _add_intra(net, prob)
    cap_m = K / n_train
    for i in np.flatnonzero(prob.in_training):
        net.add_arc(res, int(i), cap_m, cap_m)
    required = 0.0
    for i in range(n):
        if supply[i] > 0:
            net.add_arc(src, i, supply[i])
            required += supply[i]
        elif supply[i] < 0:
            net.add_arc(i, snk, -supply[i])
    total = float(out.sum())
    if total > 0:
        net.add_arc(src, res, total)
        required += total
    elif total < 0:
        net.add_arc(res, snk, -total)
    if required == 0.0:
        return True
    flow = net.max_flow(src, snk)
    return flow >= required - SATURATION_TOL * max(1.0, required)


def cluster_all_patterns_feasible(prob: ClusterFlowProblem, K: float, L: float, n_train: int):
    """Check every sign pattern of a cluster with a single min-cut.

    Returns ``(feasible, witness_signs)``; the witness is a violating pattern
    (flux into the minimum-cut side, out of the rest) or ``None``.
    """
    n = len(prob.nodes)
    if len(prob.boundary) == 0:
        return True, None
    beta = np.zeros(n)
    np.add.at(beta, prob.boundary_node, prob.boundary_cap)
    src, snk = n, n + 1
    net = FlowNetwork(n + 2)
    _add_intra(net, prob)
    cap_m = K / n_train
    required = 0.0
    for i in range(n):
        if beta[i] > 0:
            net.add_arc(src, i, L * beta[i])
            required += L * beta[i]
        if prob.in_training[i]:
            net.add_arc(i, snk, cap_m)
    flow = net.max_flow(src, snk)
    if flow >= required - SATURATION_TOL * max(1.0, required):
        return True, None
    side = np.zeros(n + 2, dtype=bool)
    side[net.source_side(src)] = True
    inside = side[prob.boundary_node]
    # inflow into the cut side: outflow sign * b = -1 there
    signs = np.where(inside, -prob.boundary_sign, prob.boundary_sign)
    return False, signs


@dataclass
class ResolvingCertificate:
    K: float
    L: float
    status: str  # "certified" | "refuted" | "sampled-only"
    patterns_checked: int
    witness: dict | None = None
    method: str = "enumerate"

    @property
    def kappa(self) -> float | None:
        return condition_number(self.K, self.L) if self.L > 3 else None

    def to_dict(self) -> dict:
        return {
            "K": float(self.K),
            "L": float(self.L),
            "status": self.status,
            "patterns_checked": int(self.patterns_checked),
            "witness": self.witness,
            "kappa": self.kappa,
        }


def _witness(g, prob, signs):
    return {
        "cluster": int(prob.cluster),
        "edges": [
            [int(g.heads[e]), int(g.tails[e]), int(s)] for e, s in zip(prob.boundary, signs)
        ],
    }


def _sign_patterns(m):
    for bits in itertools.product((1.0, -1.0), repeat=m):
        yield np.array(bits)


def check_resolving(
    g: EmpiricalGraph,
    p: Partition,
    training,
    K: float,
    L: float,
    *,
    method: str = "auto",
    budget: int = ENUMERATION_LIMIT,
    n_sampled: int = SAMPLED_PATTERNS,
    seed: int = 0,
) -> ResolvingCertificate:
    """Decide whether ``training`` resolves ``p`` with constants ``(K, L)``.

    Parameters
    ----------
    method : {"auto", "enumerate", "cut"}
        ``"enumerate"`` solves one max-flow per (cluster, sign pattern) and,
        for clusters with more than ``budget`` incident boundary edges, checks
        ``n_sampled`` uniformly random patterns instead (status
        ``"sampled-only"`` unless a pattern fails). ``"cut"`` decides all
        patterns of each cluster exactly with one min-cut. ``"auto"``
        enumerates up to ``budget`` edges and uses the min-cut beyond.
    """
    _check_constants(K, L)
    if method not in ("auto", "enumerate", "cut"):
        raise ValueError(f"unknown method {method!r}")
    training = _training_nodes(g, training)
    n_train = len(training)
    checked = 0
    sampled = False
    used = set()
    rng = np.random.Generator(np.random.PCG64(seed))
    for c in range(p.n_clusters):
        prob = cluster_problem(g, p, c, training)
        m = len(prob.boundary)
        if m == 0:
            checked += 1
            continue
        if method == "cut" or (method == "auto" and m > budget):
            ok, signs = cluster_all_patterns_feasible(prob, K, L, n_train)
            checked += 1
            used.add("cut")
            if not ok:
                return ResolvingCertificate(K, L, "refuted", checked, _witness(g, prob, signs), "cut")
            continue
        if m > budget:
            warnings.warn(
                f"cluster {c} has {m} boundary edges (> {budget}); checking {n_sampled} random patterns",
                PatternBudgetExceeded,
                stacklevel=2,
            )
            sampled = True
            patterns = (rng.choice([-1.0, 1.0], size=m) for _ in range(n_sampled))
        else:
            patterns = _sign_patterns(m)
        used.add("enumerate")
        for signs in patterns:
            checked += 1
            if not pattern_feasible(prob, signs, K, L, n_train):
                return ResolvingCertificate(K, L, "refuted", checked, _witness(g, prob, signs), "enumerate")
    status = "sampled-only" if sampled else "certified"
    return ResolvingCertificate(K, L, status, checked, None, "+".join(sorted(used)) or "trivial")


def global_pattern_feasible(g: EmpiricalGraph, p: Partition, training, K: float, L: float, pattern) -> bool:
    """Feasibility of one global sign pattern (``pattern[k]`` for boundary edge ``p.boundary[k]``)."""
    training = _training_nodes(g, training)
    sign_of = dict(zip(p.boundary.tolist(), np.asarray(pattern, dtype=float)))
    for c in range(p.n_clusters):
        prob = cluster_problem(g, p, c, training)
        if len(prob.boundary) == 0:
            continue
        signs = [sign_of[int(e)] for e in prob.boundary]
        if not pattern_feasible(prob, signs, K, L, len(training)):
            return False
    return True


def max_certifiable_L(
    g: EmpiricalGraph, p: Partition, training, K: float, tol: float = 1e-6, *, L_max: float = 1e12
) -> float:
    """Largest ``L`` (to within ``tol``) for which ``training`` resolves ``p``.

    Feasibility is monotone in ``L``, so the answer is found by bracketing and
    bisection on the exact min-cut check. Returns ``inf`` when the partition
    has no boundary edges.

    Raises
    ------
    NoFeasibleLError
        If a cluster with boundary edges contains no training node; then no
        ``L > 0`` is certifiable.
    """
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    training = _training_nodes(g, training)
    n_train = len(training)
    probs = [cluster_problem(g, p, c, training) for c in range(p.n_clusters)]
    probs = [pr for pr in probs if len(pr.boundary)]
    if not probs:
        return math.inf
    for pr in probs:
        if not pr.in_training.any():
            raise NoFeasibleLError(
                f"cluster {pr.cluster} has boundary edges but no training node; no L > 0 is certifiable"
            )

    def ok(L):
        return all(cluster_all_patterns_feasible(pr, K, L, n_train)[0] for pr in probs)

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > L_max:
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class NccReport:
    K: float
    L: float
    samples_tested: int
    violated: bool
    worst_margin: float
    witness: np.ndarray | None = field(default=None, repr=False)
    note: str = "sampled check: a pass is evidence, not a proof"

    def to_dict(self) -> dict:
        return {
            "K": float(self.K),
            "L": float(self.L),
            "samples_tested": int(self.samples_tested),
            "violated": bool(self.violated),
            "worst_margin": float(self.worst_margin),
            "note": self.note,
        }


def ncc_margins(g: EmpiricalGraph, p: Partition, training, K: float, L: float, Z) -> np.ndarray:
    """``K ||z||_M + ||z||_interior - L ||z||_boundary`` for each row ``z`` of ``Z``."""
    training = _training_nodes(g, training)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    var = np.abs(Z[:, g.tails] - Z[:, g.heads]) * g.sqrt_weights
    bnd = var[:, p.boundary_mask].sum(axis=1)
    inner = var[:, ~p.boundary_mask].sum(axis=1)
    zm = np.sqrt(np.mean(Z[:, training] ** 2, axis=1))
    return K * zm + inner - L * bnd, L * bnd


def _ncc_candidates(rng, p, n_nodes, count):
    """Gaussian signals, random piecewise-constant signals and noisy versions of them."""
    kinds = rng.integers(0, 3, size=count)
    Z = rng.standard_normal((count, n_nodes))
    piecewise = rng.standard_normal((count, p.n_clusters))[:, p.labels]
    scale = 10.0 ** rng.uniform(-4, 0, size=(count, 1))
    Z = np.where((kinds == 0)[:, None], Z, np.where((kinds == 1)[:, None], piecewise, piecewise + scale * Z))
    return Z


def ncc_sampled_check(
    g: EmpiricalGraph,
    p: Partition,
    training,
    K: float,
    L: float,
    n_samples: int,
    seed: int = 0,
    *,
    chunk: int = 10_000,
    rtol: float = 1e-9,
) -> NccReport:
    """Search for signals violating ``L ||z||_dF <= K ||z||_M + ||z||_(E minus dF)``.

    Tests every cluster indicator, then ``n_samples`` random signals.
    A sample counts as violating only if it fails by more than
    ``rtol * (1 + L ||z||_dF)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = math.inf
    worst_z = None
    violated = False
    tested = 0
    sizes = [chunk] * (n_samples // chunk) + ([n_samples % chunk] if n_samples % chunk else [])
    batches = itertools.chain(
        [np.eye(p.n_clusters)[:, p.labels]],
        (_ncc_candidates(rng, p, g.n_nodes, b) for b in sizes),
    )
    for batch in batches:
        margin, lhs = ncc_margins(g, p, training, K, L, batch)
        tested += len(batch)
        j = int(np.argmin(margin))
        if margin[j] < worst:
            worst, worst_z = float(margin[j]), batch[j]
        if np.any(margin < -rtol * (1.0 + lhs)):
            violated = True
    return NccReport(K, L, tested, violated, worst, worst_z if violated else None)


def condition_number(K: float, L: float) -> float:
    """``(K + 3) / (L - 3)``; requires ``L > 3``."""
    if not L > 3:
        raise LTooSmallError(f"condition number needs L > 3, got L={L}")
    return (K + 3) / (L - 3)
