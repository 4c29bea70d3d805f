import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import chain_graph
from hypfill.errors import DepthExceeded, RegimeWarning, ResolutionExceeded, UnknownFormat
from hypfill.filling import (HORIZONTAL, VERTICAL, ParamRegime, Vertex, bfs_levels, bounded_overlap,
                             build_filling, check_upper_cliques, check_edge_rules, check_tree, descendants,
                             export_graph, graph_from_dict, graph_to_dict, graphs_equal, hop_distances,
                             max_degree, meet_vertex, overlap_drift, overlap_window, scale_index,
                             tree_branch)
from hypfill.generators import make_cantor, make_circle
from hypfill.metric_space import from_matrix, pairwise

# point ids in the line fixture: 0 -> 0.0, 1 -> 0.3, 2 -> 0.5, 3 -> 0.9


def kind_of(g, u, v):
    for a, b, k in g.edges:
        if {int(a), int(b)} == {g.vid(u), g.vid(v)}:
            return int(k)
    return None


def test_line_edges(line4_graph):
    g = line4_graph
    assert kind_of(g, (0, 1), (2, 1)) == HORIZONTAL
    assert kind_of(g, (0, 0), (0, 1)) == VERTICAL
    assert kind_of(g, (0, 0), (2, 1)) == VERTICAL
    # 0.9 - 0.3 = 0.6 is not below 1/4 + 1/8, the level-2/3 vertical radius sum
    assert kind_of(g, (3, 2), (1, 3)) is None


def test_line_tree_branch(line4_graph):
    assert tree_branch(line4_graph, (3, 3)) == [(0, 0), (2, 1), (3, 2), (3, 3)]
    assert tree_branch(line4_graph, (0, 0)) == [Vertex(0, 0)]
    for v in line4_graph.level_ids(1):
        assert len(tree_branch(line4_graph, int(v))) == 2


def test_line_descendants(line4_graph):
    g = line4_graph
    assert descendants(g, (0, 1), 2) == {(0, 2), (2, 2)}
    children = {g.vertex(k) for k in g.children[g.vid((0, 1))]}
    assert descendants(g, (0, 1), 2) == children
    with pytest.raises(DepthExceeded):
        descendants(g, (0, 1), 4)
    with pytest.raises(ValueError):
        descendants(g, (0, 1), 1)


def test_root_descends_to_full_levels():
    g = build_filling(make_circle(64).space, 2, 9, 5)
    for n in range(1, 6):
        assert descendants(g, (0, 0), n) == {g.vertex(int(i)) for i in g.level_ids(n)}


def test_line_meet(line4_graph):
    g = line4_graph
    b0, b3 = tree_branch(g, (0, 3)), tree_branch(g, (3, 3))
    assert meet_vertex(g, b0, b3) == (0, 3)
    assert meet_vertex(g, b3, b3) == (3, 3)


def test_meet_deepens_with_depth(line4, quiet):
    g = build_filling(line4, 2, 9, 5)
    v = meet_vertex(g, tree_branch(g, (0, 5)), tree_branch(g, (3, 5)))
    assert v.level == 4


def test_meet_far_apart_is_root():
    # with alpha = 3, tau = 1.2 the two level-1 vertices are 0.9 >= 2 tau / 3 apart
    s = from_matrix([[0, 0.9], [0.9, 0]])
    with pytest.warns(RegimeWarning), warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionExceeded)
        g = build_filling(s, 3, 1.2, 2)
    assert meet_vertex(g, tree_branch(g, (0, 2)), tree_branch(g, (1, 2))) == (0, 0)


def test_chain():
    g = chain_graph(4)
    assert g.n_vertices == 5
    assert all(k == VERTICAL for k in g.edges[:, 2])
    assert len(g.edges) == 4


def test_regime_flags():
    r = ParamRegime(2, 9)
    assert r.basic and r.upper_cliques and r.j0 == -2
    assert 2.0 ** -r.j0 < 9 - 1 <= 2.0 ** (1 - r.j0)
    assert not ParamRegime(2, 8.9).basic
    assert ParamRegime(3, 19).j0 == -2
    assert not ParamRegime(2, 9, C_U=1.5).part_two
    assert ParamRegime(30, 910, C_U=3).part_two


def test_regime_warning(line4):
    with pytest.warns(RegimeWarning):
        build_filling(line4, 2, 5, 2)


@pytest.mark.parametrize("d,alpha", [(0.3, 2), (0.5, 2), (0.25, 2), (0.9, 3), (1 / 9, 3), (0.001, 2)])
def test_scale_index(d, alpha):
    n = scale_index(d, alpha)
    assert alpha ** -n < d <= alpha ** (1 - n)


def test_checks_on_generators():
    for space in (make_circle(128).space, make_cantor(6).space):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionExceeded)
            g = build_filling(space, 2, 9, 6)
        assert check_edge_rules(g)
        assert check_upper_cliques(g) == 0
        assert check_tree(g)
        assert np.all(bfs_levels(g) >= 0)
        assert len(bounded_overlap(g)) == 7
        assert max(max_degree(g)) > 0


def test_edge_rule_check_notices_tampering(line4_graph):
    g = line4_graph
    tampered = graph_from_dict({**graph_to_dict(g), "edges": graph_to_dict(g)["edges"][1:]}, g.space)
    assert not check_edge_rules(tampered)


def test_overlap_window():
    g = build_filling(make_circle(256).space, 2, 9, 8)
    w = overlap_window(g)
    assert w and all(9 * 2.0 ** -n < 0.9 for n in w)
    assert overlap_drift(g) <= 2


def test_hops_chain_is_tree_metric():
    g = chain_graph(3)
    h = hop_distances(g)
    assert h[0, 3] == 3


# ---------------------------------------------------------------- export

def test_dot_chain():
    g = chain_graph(2)
    dot = export_graph(g, "dot").decode()
    assert dot.count("--") == 2 and "dashed" not in dot
    assert dot.count("rank=same") == 3


def test_json_round_trip(line4_graph):
    g = line4_graph
    doc = json.loads(export_graph(g, "json"))
    assert set(doc) == {"params", "levels", "edges", "tree"}
    assert doc["params"] == {"alpha": 2.0, "tau": 9.0, "depth": 3}
    back = graph_from_dict(doc, g.space)
    assert graphs_equal(g, back)
    assert check_edge_rules(back)


@pytest.mark.parametrize("fmt", ["", "svg"])
def test_unknown_format(line4_graph, fmt):
    with pytest.raises(UnknownFormat):
        export_graph(line4_graph, fmt)


# ---------------------------------------------------------------- properties

clouds = arrays(np.float64, st.tuples(st.integers(2, 12), st.just(2)),
                elements=st.floats(0, 1, allow_nan=False, width=32), unique=True)


@given(clouds, st.sampled_from([(2.0, 9.0), (3.0, 19.0), (2.0, 12.0)]), st.integers(1, 5))
def test_filling_invariants(x, params, depth):
    d = pairwise(x)
    if np.any(d[~np.eye(len(d), dtype=bool)] == 0):
        return
    s = from_matrix(d, normalize=0.9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionExceeded)
        g = build_filling(s, *params, depth)
    assert check_edge_rules(g)
    assert check_upper_cliques(g) == 0
    assert check_tree(g)
    assert np.all(bfs_levels(g) >= 0)
    # every vertex descends from the root
    for n in range(1, depth + 1):
        assert len(descendants(g, (g.vpoint[0], 0), n)) == len(g.level_ids(n))
    assert graphs_equal(g, graph_from_dict(json.loads(export_graph(g)), s))
