import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nlasso.errors import MaxItersReached
from nlasso.estimator import NetworkLassoRegressor
from nlasso.graph import build_graph
from nlasso.signal import LabelSet
from nlasso.solver import SolverConfig, solve


@pytest.fixture
def graph():
    return build_graph(5, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 0.1), (3, 4, 1.0)])


def test_matches_solver(graph):
    est = NetworkLassoRegressor(graph, lam=0.05, max_iter=5000, tol=1e-9)
    with pytest.warns(MaxItersReached):
        est.fit(np.array([[0], [4]]), [1.0, -1.0])
    with pytest.warns(MaxItersReached):
        ref = solve(graph, LabelSet([0, 4], [1.0, -1.0]), SolverConfig(0.05, max_iters=5000, rel_tol=1e-9))
    assert np.array_equal(est.predict(range(5)), ref.x)
    assert est.n_iter_ == 5000 and not est.converged_
    assert est.objective_ == ref.objective


def test_score_on_full_labels(graph):
    y = np.array([1.0, 1.0, 1.0, -1.0, -1.0])
    est = NetworkLassoRegressor(graph, lam=1e-3, max_iter=50_000).fit(np.arange(5), y)
    assert est.score(np.arange(5), y) > 0.99


def test_params_and_clone(graph):
    est = NetworkLassoRegressor(graph, lam=0.2)
    assert est.get_params()["lam"] == 0.2
    twin = clone(est).set_params(lam=0.5)
    assert twin.lam == 0.5 and est.lam == 0.2 and twin.graph.edge_list() == graph.edge_list()


def test_not_fitted(graph):
    with pytest.raises(NotFittedError):
        NetworkLassoRegressor(graph).predict([0])


@pytest.mark.parametrize(
    "X, y",
    [
        ([0, 5], [1.0, 2.0]),
        ([0, 1.5], [1.0, 2.0]),
        ([[0, 1]], [1.0]),
        ([0, 1], [1.0]),
        ([0, 0], [1.0, 2.0]),
        ([0, 1], [1.0, np.nan]),
    ],
)
def test_invalid_input(graph, X, y):
    with pytest.raises(ValueError):
        NetworkLassoRegressor(graph).fit(X, y)


def test_graph_required():
    with pytest.raises(TypeError):
        NetworkLassoRegressor().fit([0], [1.0])
