import io
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from colsearch.graph import (BorderContext, GraphFormatError, RoadGraph, UnsupportedOperation,
                             approximate_diameter, border_restricted_dijkstra, dijkstra,
                             dijkstra_multi_target, euclidean_lower_bound, normalize,
                             parse_dimacs_co, parse_dimacs_gr, read_coordinates,
                             subgraph_dijkstra, write_id_map)
from colsearch.io import ingest_dimacs, load_graph
from colsearch.synthetic import grid_graph, path_graph, planar_graph

from oracles import floyd_warshall


def gr(text):
    return parse_dimacs_gr(io.StringIO(text.replace(" / ", "\n")))


# ---- parsing ----------------------------------------------------------------

def test_smallest_file():
    g = normalize(gr("p sp 2 2 / a 1 2 7 / a 2 1 7"))
    assert g.n == 2
    assert list(g.edges()) == [(0, 1, 7)]


def test_three_vertex_path_stays_whole():
    g = normalize(gr("p sp 3 2 / a 1 2 4 / a 2 3 5"))
    assert g.n == 3
    assert list(g.id_map) == [0, 1, 2]


def test_vertex_out_of_range_names_line():
    with pytest.raises(GraphFormatError, match="line 2: vertex id out of range"):
        gr("p sp 3 1 / a 1 5 2")


@pytest.mark.parametrize("text, msg", [
    ("p sp x 1", "malformed header"),
    ("p zz 3 1", "malformed header"),
    ("p sp 2 1 / a 1 2 0", "non-positive weight"),
    ("p sp 2 1 / a 1 2 -3", "non-positive weight"),
    ("a 1 2 3", "arc before header"),
])
def test_parse_errors(text, msg):
    with pytest.raises(GraphFormatError, match=msg):
        gr(text)


def test_duplicate_arcs_keep_min():
    g = normalize(gr("c hi / p sp 2 3 / a 1 2 9 / a 1 2 4 / a 2 1 6"))
    assert list(g.edges()) == [(0, 1, 4)]


def test_directed_arc_becomes_symmetric():
    g = normalize(gr("p sp 2 1 / a 2 1 3"))
    assert g.neighbors(0) == [(1, 3)] or list(g.neighbors(0)) == [(1, 3)]
    assert list(g.neighbors(1)) == [(0, 3)]


def test_two_triangles_keep_smallest_id_component():
    text = ("p sp 6 6 / a 4 5 1 / a 5 6 1 / a 4 6 1 / a 1 2 1 / a 2 3 1 / a 1 3 1")
    g = normalize(gr(text))
    assert g.n == 3
    assert list(g.id_map) == [0, 1, 2]


def test_normalize_identity_and_idempotent(grid12):
    g1 = normalize(grid12)
    assert g1.same_as(grid12)
    assert list(g1.id_map) == list(range(grid12.n))
    assert normalize(g1).same_as(g1)


def test_normalize_empty():
    with pytest.raises(ValueError, match="empty"):
        normalize(gr("p sp 0 0"))


def test_coordinates_and_max_speed():
    parsed = gr("p sp 2 1 / a 1 2 5")
    parsed.coords = read_coordinates(io.StringIO("v 1 0 0\nv 2 3 4\n"), 2)
    g = normalize(parsed)
    assert g.max_speed == 1.0
    parsed = gr("p sp 2 1 / a 1 2 10")
    parsed.coords = read_coordinates(io.StringIO("v 1 0 0\nv 2 3 4\n"), 2)
    assert normalize(parsed).max_speed == 0.5


def test_missing_and_duplicate_coordinates():
    with pytest.raises(GraphFormatError, match="coordinate count mismatch"):
        read_coordinates(io.StringIO("v 1 0 0\n"), 2)
    with pytest.raises(GraphFormatError, match="duplicate vertex"):
        read_coordinates(io.StringIO("v 1 0 0\nv 1 1 1\n"), 2)


def test_co_on_normalized_graph_follows_id_map():
    g = normalize(gr("p sp 4 2 / a 3 4 2 / a 2 3 2"))
    parse_dimacs_co(io.StringIO("v 1 9 9\nv 2 0 0\nv 3 1 0\nv 4 2 0\n"), g)
    assert g.coords.tolist() == [[0, 0], [1, 0], [2, 0]]


def test_max_speed_needs_coordinates():
    g = normalize(gr("p sp 2 1 / a 1 2 5"))
    with pytest.raises(UnsupportedOperation):
        g.max_speed


def test_max_speed_skips_zero_length_edges():
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [2.0, 0.0]])
    g = RoadGraph.from_edges(3, [(0, 1, 5), (1, 2, 4)], coords)
    assert g.max_speed == 0.5


def test_ingest_files_and_id_map(tmp_path):
    (tmp_path / "x.gr").write_text("p sp 4 2\na 2 3 5\na 3 4 1\n")
    (tmp_path / "x.co").write_text("v 1 0 0\nv 2 0 0\nv 3 5 0\nv 4 6 0\n")
    g = load_graph(str(tmp_path / "x.gr"))
    assert g.n == 3 and g.has_coordinates
    buf = io.StringIO()
    write_id_map(g, buf)
    assert buf.getvalue() == "2 0\n3 1\n4 2\n"
    g.save(tmp_path / "x.npz")
    back = load_graph(str(tmp_path / "x.npz"))
    assert back.same_as(g)
    assert list(back.id_map) == [1, 2, 3]
    assert ingest_dimacs(str(tmp_path / "x.gr")).coords is None


# ---- Dijkstra variants ------------------------------------------------------

def test_multi_target_p5(p5):
    assert dijkstra_multi_target(p5, 0, {2, 4}) == {2: 5, 4: 10}
    assert dijkstra_multi_target(p5, 2, {2}) == {2: 0}


def test_multi_target_matches_floyd_warshall():
    g = planar_graph(100, seed=4)
    D = floyd_warshall(g)
    rng = random.Random(9)
    for _ in range(20):
        s = rng.randrange(g.n)
        targets = rng.sample(range(g.n), 10)
        got = dijkstra_multi_target(g, s, targets)
        assert got == {t: int(D[s, t]) for t in targets}
    assert dijkstra(g, 7) == D[7].tolist()


def _root_rows(graph, landmarks):
    return [dijkstra(graph, lm) for lm in landmarks]


def test_border_search_whole_graph_equals_plain(p5):
    rows = _root_rows(p5, [0])
    ctx = BorderContext.for_range(p5, 0, p5.n, rows)
    assert ctx.border_set == []
    out, settled = border_restricted_dijkstra(p5, 2, 0, p5.n, ctx, rows)
    plain, plain_settled = subgraph_dijkstra(p5, 2, 0, p5.n)
    assert out == plain == [5, 3, 0, 1, 5]
    assert settled == plain_settled


def test_p5_split_borders(p5):
    rows = _root_rows(p5, [0])
    assert BorderContext.for_range(p5, 0, 3, rows).border_set == [2]
    assert BorderContext.for_range(p5, 3, 5, rows).border_set == [3]


def _detour_instance():
    """Subgraph 0..9 is a path with one expensive middle edge. A cheap dead-end
    chain of external vertices 10..19 hangs off border vertex 0. Plain
    multi-target search from 0 walks the whole chain before crossing the
    expensive edge; the border bound proves the chain useless."""
    edges = [(i, i + 1, 100 if i == 4 else 1) for i in range(9)]
    edges.append((0, 10, 1))
    edges += [(i, i + 1, 1) for i in range(10, 19)]
    return RoadGraph.from_edges(20, edges)


def test_detour_instance_prunes_external_vertices():
    g = _detour_instance()
    rows = _root_rows(g, [19])
    ctx = BorderContext.for_range(g, 0, 10, rows)
    assert ctx.border_set == [0]
    out, settled = border_restricted_dijkstra(g, 0, 0, 10, ctx, rows)
    plain, plain_settled = subgraph_dijkstra(g, 0, 0, 10)
    assert out == plain == [0, 1, 2, 3, 4, 104, 105, 106, 107, 108]
    assert plain_settled == 20
    assert settled == 10


def test_border_search_matches_plain_on_random_ranges():
    rng = random.Random(2)
    total_r = total_p = 0
    for trial in range(15):
        g = grid_graph(9, 9, seed=trial)
        perm = list(range(g.n))
        rng.shuffle(perm)
        g = g.permuted(perm)
        rows = _root_rows(g, rng.sample(range(g.n), 3))
        for _ in range(3):
            a = rng.randrange(g.n - 5)
            b = rng.randrange(a + 2, min(g.n, a + 30) + 1)
            ctx = BorderContext.for_range(g, a, b, rows)
            for src in rng.sample(range(a, b), 2):
                trace = []
                out, s = border_restricted_dijkstra(g, src, a, b, ctx, rows, trace)
                plain, p = subgraph_dijkstra(g, src, a, b)
                assert out == plain
                assert s <= p
                assert trace == sorted(trace), "pathmax keys must be non-decreasing"
                total_r += s
                total_p += p
    assert total_r < total_p


# ---- bounds and diameter ----------------------------------------------------

def test_euclidean_bound_collinear_and_identity():
    g = path_graph([1, 1, 1, 1])
    assert euclidean_lower_bound(g, 0, 4) == 4
    assert euclidean_lower_bound(g, 2, 2) == 0


def test_euclidean_bound_admissible(planar150):
    D = floyd_warshall(planar150)
    rng = random.Random(5)
    for _ in range(1000):
        u, v = rng.randrange(planar150.n), rng.randrange(planar150.n)
        assert euclidean_lower_bound(planar150, u, v) <= D[u, v]


def test_euclidean_bound_without_coordinates():
    g = RoadGraph.from_edges(2, [(0, 1, 3)])
    with pytest.raises(UnsupportedOperation):
        euclidean_lower_bound(g, 0, 1)


def test_diameter(p5):
    assert approximate_diameter(p5) == 10
    assert approximate_diameter(RoadGraph.from_edges(1, [])) == 0
    g = planar_graph(200, seed=8)
    assert approximate_diameter(g) <= floyd_warshall(g).max()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=12))
def test_path_distances_are_prefix_sums(weights):
    g = path_graph(weights)
    prefix = np.concatenate([[0], np.cumsum(weights)])
    assert dijkstra(g, 0) == prefix.tolist()
    assert approximate_diameter(g) == prefix[-1]
