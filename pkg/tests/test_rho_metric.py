import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import chain_graph
from hypfill.errors import EtaPlusNotBelowOne
from hypfill.filling import build_filling, tree_branch
from hypfill.generators import make_cantor, make_circle
from hypfill.rho_metric import (drho, drho_all_pairs, drho_boundary, drho_from, drho_matrix, path_cost,
                                representative, tail_bound)
from hypfill.weights import constant_rho, custom_rho, edge_integral


def floyd_warshall(g, w):
    """Independent all-pairs oracle: plain triple loop over an adjacency dict."""
    n = g.n_vertices
    dist = [[0.0 if i == j else float("inf") for j in range(n)] for i in range(n)]
    for u, v, _ in g.edges:
        c = (w.pi[u] + w.pi[v]) / 2
        dist[u][v] = dist[v][u] = min(dist[u][v], c)
    for k in range(n):
        dk = dist[k]
        for i in range(n):
            dik = dist[i][k]
            if dik == float("inf"):
                continue
            di = dist[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return np.array(dist)


def simple_paths(adj, a, b, path=None):
    path = path or [a]
    if path[-1] == b:
        yield list(path)
        return
    for nxt in adj[path[-1]]:
        if nxt not in path:
            yield from simple_paths(adj, a, b, path + [nxt])


def small_graph(n_points=10, depth=3):
    g = build_filling(make_circle(n_points).space, 2, 9, depth)
    assert g.n_vertices <= 50
    return g


def test_chain_brute_force():
    g = chain_graph(2)
    w = constant_rho(g, 0.5)
    adj = {i: [int(k) for k in g.neighbors[i]] for i in range(g.n_vertices)}
    best = min(sum(edge_integral(g, w, p, q) for p, q in zip(path, path[1:]))
               for path in simple_paths(adj, 0, 2))
    res = drho(g, w, 0, 2)
    assert best == 0.5625
    assert res.value == pytest.approx(0.5625, abs=1e-15)
    assert [tuple(v) for v in res.path] == [tuple(g.vertex(i)) for i in range(3)]


def test_identity_query():
    g = chain_graph(2)
    res = drho(g, constant_rho(g, 0.5), 1, 1)
    assert res.value == 0 and res.path == []


def test_brute_force_small_graph():
    """Exhaustive simple-path enumeration on a tiny filling."""
    g = build_filling(make_circle(4).space, 2, 9, 2)
    rng = np.random.default_rng(3)
    w = custom_rho(g, {g.vertex(i): float(v) for i, v in enumerate(rng.uniform(0.3, 0.9, g.n_vertices))})
    adj = {i: [int(k) for k in g.neighbors[i]] for i in range(g.n_vertices)}
    for a, b in itertools.combinations(range(g.n_vertices), 2):
        best = min(path_cost(g, w, [g.vertex(k) for k in p]) for p in simple_paths(adj, a, b))
        assert drho(g, w, a, b).value == pytest.approx(best, abs=1e-12)


def test_all_pairs_against_oracle():
    g = small_graph()
    rng = np.random.default_rng(11)
    w = custom_rho(g, {g.vertex(i): float(v) for i, v in enumerate(rng.uniform(0.2, 0.95, g.n_vertices))})
    ours = drho_all_pairs(g, w)
    np.testing.assert_allclose(ours, floyd_warshall(g, w), rtol=0, atol=1e-9)
    assert np.array_equal(ours, ours.T)
    n = g.n_vertices
    for i, j, k in itertools.product(range(n), repeat=3):
        assert ours[i, k] <= ours[i, j] + ours[j, k] + 1e-12
    off = ours[~np.eye(n, dtype=bool)]
    assert off.min() > 0


def test_path_cost_matches_value():
    g = build_filling(make_circle(64).space, 2, 9, 5)
    w = constant_rho(g, 0.5)
    for u, v in [(0, g.n_vertices - 1), (3, 40), (10, 11)]:
        res = drho(g, w, u, v)
        assert path_cost(g, w, res.path) == pytest.approx(res.value, abs=1e-9)


def test_chain_edge_bound():
    """Along any branch, the k-th edge integral is at most eta_plus**k."""
    g = build_filling(make_cantor(5).space, 3, 19, 5)
    w = constant_rho(g, 1 / 3)
    branch = tree_branch(g, g.n_vertices - 1)
    for k, (a, b) in enumerate(zip(branch, branch[1:])):
        assert edge_integral(g, w, a, b) <= w.eta_plus ** k


def test_worker_count_does_not_change_rows():
    g = build_filling(make_circle(128).space, 2, 9, 6)
    w = constant_rho(g, 0.5)
    src = np.arange(0, g.n_vertices, 7)
    one = drho_from(g, w, src, workers=1)
    many = drho_from(g, w, src, workers=4)
    assert one.tobytes() == many.tobytes()


# ---------------------------------------------------------------- boundary distances

def test_tail_bound_closed_form():
    g = build_filling(make_circle(256).space, 2, 9, 8)
    w = constant_rho(g, 0.5)
    assert tail_bound(g, w, 8) == 2 ** -7
    res = drho_boundary(g, w, 5, 5)
    assert res.value == 0 and res.tail_bound == 2 ** -7


def test_tail_bound_needs_eta_below_one(line4_graph):
    g = line4_graph
    vals = {g.vertex(i): 0.5 for i in range(g.n_vertices)}
    vals[(2, 1)] = 1.5
    with pytest.raises(EtaPlusNotBelowOne):
        tail_bound(g, custom_rho(g, vals), 3)


def test_representative_is_covering():
    g = build_filling(make_cantor(6).space, 3, 19, 4)
    for x in range(g.space.n):
        r = representative(g, x, 4)
        assert g.vlevel[r] == 4
        assert g.space.dist[x, g.vpoint[r]] < 3.0 ** -4
    for p in g.nets.levels[4]:
        assert g.vpoint[representative(g, p, 4)] == p


def test_refinement_within_tail_bounds():
    g = build_filling(make_circle(256).space, 2, 9, 8)
    w = constant_rho(g, 0.5)
    pairs = [(0, 128), (3, 17), (40, 41), (10, 200)]
    for x, y in pairs:
        vals = {n: drho_boundary(g, w, x, y, n) for n in (6, 7, 8)}
        for a, b in itertools.combinations(vals, 2):
            assert abs(vals[a].value - vals[b].value) < vals[a].tail_bound + vals[b].tail_bound


def test_matrix_small_cases():
    g = build_filling(make_circle(64).space, 2, 9, 5)
    w = constant_rho(g, 0.5)
    m, tb = drho_matrix(g, w, [7])
    assert m.shape == (1, 1) and m[0, 0] == 0
    m, tb = drho_matrix(g, w, [1, 20, 45])
    assert np.array_equal(m, m.T) and np.all(np.diag(m) == 0)
    for i, j, k in itertools.permutations(range(3)):
        assert m[i, k] <= m[i, j] + m[j, k] + 2 * tb


@given(st.permutations(list(range(6))))
def test_matrix_relabeling(perm):
    g = build_filling(make_circle(32).space, 2, 9, 4)
    w = constant_rho(g, 0.5)
    pts = [0, 3, 9, 15, 22, 30]
    m, _ = drho_matrix(g, w, pts)
    mp, _ = drho_matrix(g, w, [pts[i] for i in perm])
    np.testing.assert_array_equal(mp, m[np.ix_(perm, perm)])
