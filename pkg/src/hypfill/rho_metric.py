"""The uniformized metric d_rho on the truncated filling.

Edge cost is the integral of the linearly interpolated pi over a unit edge.
The density is positive and linear on each edge, so an optimal path between
vertices never turns around inside an edge and vertex-path Dijkstra is exact.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .errors import EtaPlusNotBelowOne
from .filling import FillingGraph, Vertex
from .weights import WeightAssignment, edge_costs


@dataclass
class RhoDistanceResult:
    value: float
    path: list = field(default_factory=list)
    tail_bound: float = 0.0


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HYPFILL_THREADS", "1")))
    except ValueError:
        return 1


def _cost_graph(g: FillingGraph, w: WeightAssignment):
    return g.adjacency_matrix(edge_costs(g, w))


def _walk_back(pred: np.ndarray, src: int, dst: int) -> list[int]:
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def drho(g: FillingGraph, w: WeightAssignment, u, v) -> RhoDistanceResult:
    a, b = g.vid(u), g.vid(v)
    if a == b:
        return RhoDistanceResult(0.0, [], 0.0)
    # always solve from the smaller id so that drho(u, v) == drho(v, u) bit for bit
    lo, hi = min(a, b), max(a, b)
    dist, pred = dijkstra(_cost_graph(g, w), indices=lo, return_predecessors=True)
    ids = _walk_back(pred, lo, hi)
    if lo != a:
        ids = ids[::-1]
    return RhoDistanceResult(float(dist[hi]), [g.vertex(k) for k in ids], 0.0)


def drho_from(g: FillingGraph, w: WeightAssignment, sources, workers: int | None = None) -> np.ndarray:
    """Rows of d_rho from each source vertex id to every vertex.

    Sources are split into contiguous chunks, one per worker; every row is
    computed by an independent single-source run, so the result does not
    depend on the worker count.
    """
    sources = np.asarray(sources, dtype=int)
    csr = _cost_graph(g, w)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(sources) < 2:
        return dijkstra(csr, indices=sources).reshape(len(sources), -1)
    chunks = np.array_split(sources, min(workers, len(sources)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda c: dijkstra(csr, indices=c).reshape(len(c), -1), chunks))
    return np.vstack(rows)


def drho_all_pairs(g: FillingGraph, w: WeightAssignment) -> np.ndarray:
    """All-pairs d_rho, symmetrised: the two directions sum the same edges in different orders."""
    m = drho_from(g, w, np.arange(g.n_vertices))
    return np.minimum(m, m.T)


def representative(g: FillingGraph, x: int, rep_level: int) -> int:
    """Vertex id of the nearest level-rep_level net point to x (ties by point id)."""
    ids = g.level_ids(rep_level)
    pts = g.vpoint[ids]
    dd = g.space.dist[x, pts]
    return int(ids[np.lexsort((pts, dd))[0]])


def tail_bound(g: FillingGraph, w: WeightAssignment, rep_level: int) -> float:
    """2 max pi(level rep_level) / (1 - eta_plus): both descending tails below the truncation."""
    if not w.eta_plus < 1:
        raise EtaPlusNotBelowOne(f"eta_plus = {w.eta_plus} >= 1; tail bound undefined")
    return 2 * float(w.pi[g.level_ids(rep_level)].max()) / (1 - w.eta_plus)


def drho_boundary(g: FillingGraph, w: WeightAssignment, x: int, y: int,
                  rep_level: int | None = None) -> RhoDistanceResult:
    rep_level = g.depth if rep_level is None else rep_level
    tb = tail_bound(g, w, rep_level)
    a, b = representative(g, x, rep_level), representative(g, y, rep_level)
    res = drho(g, w, a, b)
    res.tail_bound = tb
    return res


def drho_matrix(g: FillingGraph, w: WeightAssignment, points, rep_level: int | None = None,
                workers: int | None = None) -> tuple[np.ndarray, float]:
    rep_level = g.depth if rep_level is None else rep_level
    tb = tail_bound(g, w, rep_level)
    reps = np.array([representative(g, int(x), rep_level) for x in points], dtype=int)
    uniq, inv = np.unique(reps, return_inverse=True)
    rows = drho_from(g, w, uniq, workers)
    m = rows[:, uniq][np.ix_(inv, inv)]
    m = np.minimum(m, m.T)
    np.fill_diagonal(m, 0.0)
    return m, tb


def path_cost(g: FillingGraph, w: WeightAssignment, path: list[Vertex]) -> float:
    ids = [g.vid(v) for v in path]
    return float(sum((w.pi[a] + w.pi[b]) / 2 for a, b in zip(ids, ids[1:])))
