import numpy as np
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import maximum_flow

from nlasso.maxflow import FlowNetwork


def test_series_and_parallel():
    net = FlowNetwork(4)
    net.add_arc(0, 1, 3.0)
    net.add_arc(0, 2, 2.0)
    net.add_arc(1, 3, 2.5)
    net.add_arc(2, 3, 4.0)
    net.add_arc(1, 2, 1.0)
    assert net.max_flow(0, 3) == 5.0
    assert net.source_side(0) == [0]


def test_two_way_arc():
    net = FlowNetwork(3)
    net.add_arc(0, 1, 5.0)
    net.add_arc(2, 1, 1.0, 1.0)  # undirected edge of capacity 1
    assert net.max_flow(0, 2) == 1.0


def test_flow_on_arc():
    net = FlowNetwork(3)
    a = net.add_arc(0, 1, 2.0)
    net.add_arc(1, 2, 1.5)
    net.max_flow(0, 2)
    assert net.flow_on(a) == 1.5


@given(st.integers(0, 2**32 - 1))
def test_matches_scipy_on_integer_capacities(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    caps = np.where(rng.random((n, n)) < 0.35, rng.integers(1, 20, (n, n)), 0)
    np.fill_diagonal(caps, 0)
    net = FlowNetwork(n)
    for i, j in zip(*np.nonzero(caps)):
        net.add_arc(int(i), int(j), float(caps[i, j]))
    ours = net.max_flow(0, n - 1)
    ref = maximum_flow(sp.csr_matrix(caps.astype(np.int32)), 0, n - 1).flow_value
    assert ours == ref
    # the residual source side is a cut of the same value
    side = np.zeros(n, dtype=bool)
    side[net.source_side(0)] = True
    assert not side[n - 1]
    assert caps[np.ix_(side, ~side)].sum() == ref
