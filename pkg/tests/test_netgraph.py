import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushsum_penalty.netgraph import (
    DiGraph,
    GraphSchedule,
    SeededRandomSelector,
    alternate,
    certify_B,
    demo_graphs,
    is_strongly_connected,
    mixing_matrix,
    mixing_weights,
    parse_selector,
    round_robin,
    union_graph,
    verify_B,
)


def complete(n):
    return DiGraph(n, frozenset(itertools.permutations(range(n), 2)))


def one_based(g):
    return {(j + 1, i + 1) for j, i in g.edges if j != i}


def test_self_loops_added_and_counted():
    g = DiGraph.from_edges(3, [(1, 2)], one_based=True)
    assert all((k, k) in g.edges for k in range(3))
    assert g.out_degree(0) == 2 and g.out_degree(1) == 1


def test_edge_range_checked():
    with pytest.raises(ValueError):
        DiGraph(2, frozenset({(0, 2)}))
    with pytest.raises(ValueError):
        DiGraph(0)


def test_demo_graph_edges():
    g1, g2 = demo_graphs()
    assert one_based(g1) == {(1, 2), (2, 3), (2, 4)}
    assert one_based(g2) == {(4, 2), (4, 1), (3, 4)}


def test_union_demo_graphs(fig1):
    u = union_graph(fig1, 0, 2)
    assert one_based(u) == {(1, 2), (2, 3), (2, 4), (4, 2), (4, 1), (3, 4)}
    assert all((k, k) in u.edges for k in range(4))


def test_union_single_round_and_idempotence(fig1):
    assert union_graph(fig1, 3, 1) == fig1.graph_at(3)
    u = union_graph(fig1, 0, 2)
    again = DiGraph(4, u.edges | fig1.graph_at(0).edges)
    assert again == u
    with pytest.raises(ValueError):
        union_graph(fig1, 0, 0)


def test_strong_connectivity_demo_graphs(fig1):
    g1, g2 = demo_graphs()
    assert not is_strongly_connected(g1)
    assert not is_strongly_connected(g2)
    assert is_strongly_connected(union_graph(fig1, 0, 2))
    assert is_strongly_connected(complete(3))
    assert is_strongly_connected(DiGraph(1))


def test_strong_connectivity_matches_matrix_reachability():
    r = np.random.default_rng(0)
    for _ in range(200):
        n = int(r.integers(1, 7))
        edges = {(int(j), int(i)) for j, i in r.integers(0, n, size=(int(r.integers(0, 12)), 2))}
        g = DiGraph(n, frozenset(edges))
        reach = np.linalg.matrix_power((g.matrix > 0).astype(int), n) > 0
        assert is_strongly_connected(g) == bool(reach.all())


def test_verify_B_figure1(fig1):
    assert verify_B(fig1, 2, 100)
    assert not verify_B(fig1, 1, 100)
    assert certify_B(fig1, 2)
    assert not certify_B(fig1, 1)
    with pytest.raises(ValueError):
        verify_B(fig1, 5, 3)


def test_static_complete_B1():
    assert verify_B(GraphSchedule.static(complete(4)), 1, 10)


def test_mixing_weights_examples():
    g1, _ = demo_graphs()
    w = mixing_weights(g1, 1)  # node 2 in 1-based labels
    assert w == {1: pytest.approx(1 / 3), 2: pytest.approx(1 / 3), 3: pytest.approx(1 / 3)}
    assert mixing_weights(DiGraph(3), 2) == {2: 1.0}
    with pytest.raises(ValueError):
        mixing_weights(g1, 4)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=30))
def test_mixing_matrix_column_stochastic(n, pairs):
    g = DiGraph(n, frozenset((j % n, i % n) for j, i in pairs))
    m = mixing_matrix(g)
    np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-15)
    assert np.all(m >= 0)
    assert np.all(np.diag(m) > 0)


def test_matrix_read_only():
    g = complete(3)
    with pytest.raises(ValueError):
        g.matrix[0, 0] = 5.0


def _random_schedule(r, n=4, count=3):
    graphs = []
    for _ in range(count):
        edges = {(int(j), int(i)) for j, i in r.integers(0, n, size=(int(r.integers(1, 6)), 2))}
        graphs.append(DiGraph(n, frozenset(edges)))
    return GraphSchedule(graphs, round_robin(count), period=count)


def test_verify_B_monotone_in_B():
    r = np.random.default_rng(11)
    for _ in range(100):
        s = _random_schedule(r)
        verdicts = [verify_B(s, B, 30) for B in range(1, 8)]
        first = verdicts.index(True) if True in verdicts else len(verdicts)
        assert all(verdicts[first:])


def test_selectors():
    assert [alternate(t) for t in range(4)] == [0, 1, 0, 1]
    assert [round_robin(3)(t) for t in range(5)] == [0, 1, 2, 0, 1]
    sel, period = parse_selector("alternate", 2)
    assert period == 2 and sel(7) == 1
    sel, period = parse_selector("round-robin", 3)
    assert period == 3 and sel(4) == 1
    with pytest.raises(ValueError):
        parse_selector("alternate", 3)
    with pytest.raises(ValueError):
        parse_selector("sometimes", 2)


def test_seeded_random_reproducible():
    a, pa = parse_selector("seeded-random(0.3, 42)", 3)
    b, _ = parse_selector("seeded-random(0.3, 42)", 3)
    c, _ = parse_selector("seeded-random(0.3, 43)", 3)
    assert pa is None
    seq_a = [a(t) for t in range(300)]
    # query b out of order; values must not depend on access order
    assert [b(t) for t in reversed(range(300))][::-1] == seq_a
    assert [c(t) for t in range(300)] != seq_a
    assert set(seq_a) == {0, 1, 2}
    with pytest.raises(ValueError):
        SeededRandomSelector(2, 1.5, 0)


def test_schedule_rejects_mixed_sizes():
    with pytest.raises(ValueError):
        GraphSchedule([DiGraph(2), DiGraph(3)])
    with pytest.raises(ValueError):
        GraphSchedule([])
