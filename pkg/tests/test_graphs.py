import numpy as np
import pytest

from dirac_graph import (
    GraphError,
    MetricGraph,
    PeriodicGraph,
    build_example,
    close_periodically,
    quotient_cell,
)

EXAMPLES = ["chain", "decorated_chain", "ladder", "strip", "square_lattice"]


def test_chain_quotient_one_vertex_one_loop():
    q = quotient_cell(build_example("chain"))
    assert q.graph.num_vertices == 1
    assert q.graph.num_edges == 1


def test_square_lattice_quotient_one_vertex_two_loops():
    q = quotient_cell(build_example("square_lattice"))
    assert q.graph.num_vertices == 1
    assert q.graph.num_edges == 2
    # one loop per generator, each winding by its own unit vector
    winds = sorted(tuple((wh - wt).tolist()) for wt, wh in q.windings)
    assert winds == [(0, 1), (1, 0)]


def test_example_cell_shapes():
    lad = build_example("ladder")
    assert quotient_cell(lad).graph.num_vertices == 2
    assert quotient_cell(lad).graph.num_edges == 3
    strip = build_example("strip")
    assert quotient_cell(strip).graph.num_vertices == 3
    assert quotient_cell(strip).graph.num_edges == 5


def test_degenerate_lengths_rejected():
    with pytest.raises(GraphError):
        build_example("decorated_chain", L=0.0)
    with pytest.raises(GraphError):
        build_example("chain", length=-1.0)


def test_closure_counts():
    c = close_periodically(build_example("chain"), (8,))
    assert c.graph.num_vertices == 8
    assert c.graph.num_edges == 8
    assert all(c.graph.degree(v) == 2 for v in range(8))

    lad = close_periodically(build_example("ladder"), (4,))
    assert (lad.graph.num_vertices, lad.graph.num_edges) == (8, 12)

    sq = close_periodically(build_example("square_lattice"), (3, 3))
    assert (sq.graph.num_vertices, sq.graph.num_edges) == (9, 18)


def test_closure_rejects_small_counts():
    with pytest.raises(GraphError):
        close_periodically(build_example("chain"), (2,))
    with pytest.raises(GraphError):
        close_periodically(build_example("square_lattice"), (3, 2))


@pytest.mark.parametrize("kind", EXAMPLES)
def test_translate_is_length_preserving_automorphism(kind):
    g = build_example(kind)
    N = (4, 3) if g.dim == 2 else (5,)
    c = close_periodically(g, N)
    lengths = c.graph.edge_length_multiset()
    for k in c.cells:
        vperm = c.translate_vertices(k)
        eperm = c.translate_edges(k)
        assert sorted(vperm.tolist()) == list(range(c.graph.num_vertices))
        for e in range(c.graph.num_edges):
            src = c.graph.edges[e]
            dst = c.graph.edges[eperm[e]]
            assert dst.length == src.length
            assert dst.tail == vperm[src.tail]
            assert dst.head == vperm[src.head]
        assert c.graph.edge_length_multiset() == lengths


def test_translate_group_action():
    c = close_periodically(build_example("square_lattice"), (3, 4))
    rng = np.random.default_rng(0)
    for _ in range(10):
        k = tuple(rng.integers(0, 5, size=2))
        l = tuple(rng.integers(0, 5, size=2))
        pk = c.translate_vertices(k)
        pl = c.translate_vertices(l)
        pkl = c.translate_vertices((k[0] + l[0], k[1] + l[1]))
        assert np.array_equal(pk[pl], pkl)


def test_incidence_roundtrip():
    for kind in EXAMPLES:
        g = build_example(kind)
        assert g.cell.validate_incidence_roundtrip()


def test_gluing_validation():
    cell = MetricGraph(2, [(0, 1, 1.0)])
    with pytest.raises(GraphError):
        PeriodicGraph(cell, 1, [[(1, 1)]])  # out/in sets overlap
    with pytest.raises(GraphError):
        PeriodicGraph(cell, 1, [[(0, 1), (0, 1)]])  # not a bijection


def test_disconnected_periodic_rejected():
    # two parallel chains with no rungs: each generator orbit is connected
    # cellwise but the patch splits into two components
    cell = MetricGraph(4, [(0, 2, 1.0), (1, 3, 1.0)], check_connected=False)
    with pytest.raises(GraphError):
        PeriodicGraph(cell, 1, [[(2, 0), (3, 1)]])


def test_json_roundtrip(tmp_path):
    g = build_example("decorated_chain", L=0.7)
    path = tmp_path / "g.json"
    g.save_json(path)
    g2 = PeriodicGraph.load_json(path)
    assert g2.cell.num_vertices == g.cell.num_vertices
    assert g2.cell.edge_length_multiset() == g.cell.edge_length_multiset()
    assert g2.gluings == g.gluings
    c = close_periodically(g2, (4,))
    assert c.graph.num_edges == 8


def test_graph_json_schema_validation(tmp_path):
    import json

    bad = {"vertices": ["a"], "edges": [], "dim": 1, "gluings": [[]]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(GraphError):
        PeriodicGraph.load_json(p)
