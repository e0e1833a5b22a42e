import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagrange_swarm.graph import (DirectedGraph, NoSpanningTree, SwitchingSignal, format_edge_list,
                                  format_schedule, has_rooted_spanning_tree, laplacian,
                                  parse_edge_list, parse_schedule, solve_gamma, topology_at)

from conftest import random_tree_graph


# -- oracles -----------------------------------------------------------------------

def brute_laplacian(W):
    n = W.shape[0]
    L = np.zeros_like(W)
    for i in range(n):
        for j in range(n):
            if i != j:
                L[i, j] = -W[i, j]
                L[i, i] += W[i, j]
    return L


def closure_reach(W, root):
    """Warshall transitive closure on the edge relation j -> i (w_ij > 0)."""
    n = W.shape[0]
    R = (W.T > 0) | np.eye(n, dtype=bool)   # R[a, b]: a reaches b
    for k in range(n):
        R = R | (R[:, k:k + 1] & R[k:k + 1, :])
    return R[root].all()


def sym_min_eig(gamma, L22):
    G = np.diag(gamma)
    return np.linalg.eigvalsh(G @ L22 + L22.T @ G)[0]


# -- laplacian ---------------------------------------------------------------------

def test_laplacian_empty_graph():
    g = DirectedGraph.from_edges(3, [])
    assert np.all(laplacian(g).L == 0)


def test_laplacian_single_edge():
    part = laplacian(DirectedGraph.from_edges(1, [(0, 1, 5.0)]))
    np.testing.assert_array_equal(part.L, [[0, 0], [-5, 5]])
    np.testing.assert_array_equal(part.L22, [[5]])
    np.testing.assert_array_equal(part.L21, [[-5]])


def test_laplacian_chain():
    part = laplacian(DirectedGraph.from_edges(2, [(0, 1, 5), (1, 2, 5)]))
    np.testing.assert_array_equal(part.L22, [[5, 0], [-5, 5]])
    np.testing.assert_array_equal(part.L, brute_laplacian(part.adjacency()))


def test_laplacian_matches_bruteforce_on_random_graphs():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = random_tree_graph(rng, 8)
        part = laplacian(g)
        np.testing.assert_allclose(part.L, brute_laplacian(g.weights), atol=0)
        assert np.all(part.L - np.diag(np.diag(part.L)) <= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(1, 9)),
                                   max_size=20))
def test_laplacian_rows_sum_to_zero(n, raw):
    edges = [(s, d, float(w)) for s, d, w in raw if s <= n and d <= n and s != d]
    L = laplacian(DirectedGraph.from_edges(n, edges)).L
    assert np.all(L.sum(axis=1) == 0)


def test_graph_rejects_bad_weights():
    with pytest.raises(ValueError):
        DirectedGraph.from_edges(2, [(0, 1, -1.0)])
    with pytest.raises(ValueError):
        DirectedGraph.from_edges(2, [(1, 1, 1.0)])
    with pytest.raises(ValueError):
        DirectedGraph.from_edges(2, [(0, 3, 1.0)])


# -- spanning trees ------------------------------------------------------------------

def test_spanning_tree_examples():
    assert has_rooted_spanning_tree(DirectedGraph.from_edges(0, []), 0)
    assert has_rooted_spanning_tree(DirectedGraph.from_edges(2, [(0, 1, 1), (1, 2, 1)]), 0)
    assert not has_rooted_spanning_tree(DirectedGraph.from_edges(2, [(1, 2, 1), (2, 1, 1)]), 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 7), st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=25),
       st.integers(0, 7))
def test_reachability_agrees_with_transitive_closure(n, raw, root):
    root = root % (n + 1)
    edges = [(s, d, 1.0) for s, d in raw if s <= n and d <= n and s != d]
    g = DirectedGraph.from_edges(n, edges)
    assert has_rooted_spanning_tree(g, root) == closure_reach(g.weights, root)


# -- gamma -------------------------------------------------------------------------------

def test_gamma_scalar_case():
    cert = solve_gamma(laplacian(DirectedGraph.from_edges(1, [(0, 1, 5)])))
    np.testing.assert_allclose(cert.gamma, [1.0])
    assert cert.min_eig == pytest.approx(10.0)


def test_gamma_two_followers_against_grid():
    L22 = np.array([[5.0, 0.0], [-5.0, 5.0]])
    grid = np.linspace(0.02, 1.0, 50)
    feasible = [(a, b) for a in grid for b in grid if sym_min_eig(np.array([a, b]), L22) > 0]
    assert feasible  # the grid oracle agrees a certificate exists
    cert = solve_gamma(laplacian(DirectedGraph.from_edges(2, [(0, 1, 5), (1, 2, 5)])))
    assert np.all((cert.gamma > 0) & (cert.gamma <= 1))
    assert cert.min_eig > 0
    assert cert.min_eig == pytest.approx(sym_min_eig(cert.gamma, L22), rel=1e-12)


def test_gamma_disconnected_followers():
    g = DirectedGraph.from_edges(3, [(0, 1, 1), (2, 3, 1)])
    with pytest.raises(NoSpanningTree):
        solve_gamma(laplacian(g))


def test_gamma_rejects_leader_with_incoming_edge():
    g = DirectedGraph.from_edges(2, [(0, 1, 1), (1, 2, 1), (2, 0, 1)])
    with pytest.raises(NoSpanningTree):
        solve_gamma(laplacian(g))


def test_gamma_random_graphs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        part = laplacian(random_tree_graph(rng, 8))
        cert = solve_gamma(part)
        assert cert.gamma.max() == 1.0
        assert np.all(cert.gamma > 0)
        assert sym_min_eig(cert.gamma, part.L22) > 0


# -- switching signals --------------------------------------------------------------

def _three():
    return [DirectedGraph.from_edges(2, [(0, k % 2 + 1, 1.0 + k), (k % 2 + 1, 2 - k % 2, 1.0)])
            for k in range(3)]


def test_topology_at_examples():
    gs = _three()
    assert topology_at(SwitchingSignal(gs[:1], [(0.0, 0)]), 7.0) == gs[0]
    two = SwitchingSignal(gs[:2], [(0.0, 0), (1.0, 1)])
    assert topology_at(two, 1.0) == gs[1]
    assert topology_at(two, 0.999) == gs[0]
    rr = SwitchingSignal.periodic(gs, 1.0, 10.0)
    assert rr.index_at(2.5) == 2
    assert rr.index_at(3.0) == 0


def test_switching_signal_validation():
    gs = _three()
    with pytest.raises(ValueError):
        SwitchingSignal(gs, [(0.5, 0)])
    with pytest.raises(ValueError):
        SwitchingSignal(gs, [(0.0, 0), (1.0, 5)])
    with pytest.raises(ValueError):
        SwitchingSignal(gs, [(0.0, 0), (1.0, 1), (1.2, 2)], dwell_floor=0.5)
    with pytest.raises(ValueError):
        SwitchingSignal(gs, [(0.0, 0)]).index_at(-1.0)


def test_switch_times_and_gap():
    gs = _three()
    sig = SwitchingSignal(gs, [(0.0, 0), (1.0, 0), (2.0, 1), (2.5, 2)])
    assert sig.switch_times() == [2.0, 2.5]
    assert sig.min_gap() == pytest.approx(0.5)
    assert math.isinf(SwitchingSignal(gs, [(0.0, 0)]).min_gap())


# -- serialization ------------------------------------------------------------------

def test_edge_list_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = random_tree_graph(rng, 6)
        assert parse_edge_list(format_edge_list(g)) == g


def test_edge_list_comments_and_errors():
    g = parse_edge_list("# demo\nnodes 3\n0 1 5  # pinned\n1 2 2.5\n")
    assert g.n_followers == 3 and g.weights[1, 0] == 5 and g.weights[2, 1] == 2.5
    with pytest.raises(ValueError):
        parse_edge_list("0 1\n")
    with pytest.raises(ValueError):
        parse_edge_list("0 x 1\n")


def test_schedule_round_trip():
    sched = [(0.0, 0), (1.0, 2), (2.5, 1)]
    assert parse_schedule(format_schedule(sched)) == sched
    with pytest.raises(ValueError):
        parse_schedule("1.0\n")
