"""scikit-learn wrapper around the network Lasso solver."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import MaxItersReached
from .graph import EmpiricalGraph
from .signal import LabelSet
from .solver import SolverConfig, solve


def _node_ids(X, n_nodes):
    X = np.asarray(X)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"X must hold one node id per row, got shape {X.shape}")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"X must be 1-d or a single column, got shape {X.shape}")
    if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
        raise ValueError("node ids must be integers")
    ids = X.astype(np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= n_nodes):
        raise ValueError(f"node ids must lie in 0..{n_nodes - 1}")
    return ids


class NetworkLassoRegressor(RegressorMixin, BaseEstimator):
    """Semi-supervised regression over the nodes of a fixed graph.

    Samples are node ids. ``fit`` takes the labelled nodes and their labels
    and estimates a signal on every node; ``predict`` reads it off.

    Parameters
    ----------
    graph : EmpiricalGraph
    lam : float
        Weight of the total-variation penalty.
    max_iter : int
    tol : float
        Relative stopping tolerance of the solver.

    Attributes
    ----------
    signal_ : ndarray of shape (n_nodes,)
    n_iter_ : int
    objective_ : float
    converged_ : bool

    Examples
    --------
    >>> from nlasso.graph import build_graph
    >>> g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    >>> est = NetworkLassoRegressor(g, lam=1e-3, max_iter=20000).fit([0, 2], [0.0, 1.0])
    >>> bool(est.predict([1])[0] >= 0)
    True
    """

    def __init__(self, graph: EmpiricalGraph = None, lam: float = 0.1, max_iter: int = 100_000, tol: float = 1e-7):
        self.graph = graph
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        if not isinstance(self.graph, EmpiricalGraph):
            raise TypeError("graph must be an EmpiricalGraph")
        ids = _node_ids(X, self.graph.n_nodes)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(ids):
            raise ValueError(f"X has {len(ids)} samples but y has {len(y)}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("each node may be labelled once")
        cfg = SolverConfig(float(self.lam), max_iters=int(self.max_iter), rel_tol=float(self.tol))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", MaxItersReached)
            res = solve(self.graph, LabelSet(ids, y), cfg)
        for w in caught:
            warnings.warn(w.message, w.category, stacklevel=2)
        self.signal_ = res.x
        self.n_iter_ = res.iters
        self.objective_ = res.objective
        self.converged_ = res.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "signal_")
        return self.signal_[_node_ids(X, self.graph.n_nodes)]
