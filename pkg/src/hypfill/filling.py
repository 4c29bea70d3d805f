"""The hyperbolic filling graph over a net hierarchy.

Vertices are pairs (point, level) with point in A_level. Same-level vertices
are joined when their tau-scaled balls meet, adjacent-level vertices when
their plain balls meet. A spanning tree of vertical edges fixes one parent
per non-root vertex.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .errors import DepthExceeded, EmptyLevel, RegimeWarning, UnknownFormat
from .metric_space import FiniteMetricSpace
from .nets import NetHierarchy, build_nested_nets

HORIZONTAL = 0
VERTICAL = 1
_KIND_NAMES = {HORIZONTAL: "horizontal", VERTICAL: "vertical"}


class Vertex(NamedTuple):
    point: int
    level: int


def scale_index(dist: float, alpha: float) -> int:
    """The integer n with alpha**-n < dist <= alpha**(1-n)."""
    n = math.floor(-math.log(dist) / math.log(alpha)) + 1
    # repair floating error in the log at exact powers
    while alpha ** -n >= dist:
        n += 1
    while alpha ** (1 - n) < dist:
        n -= 1
    return n


@dataclass(frozen=True)
class ParamRegime:
    alpha: float
    tau: float
    C_U: float | None = None

    @property
    def basic(self) -> bool:
        return self.alpha >= 2 and self.tau >= 2 * self.alpha ** 2 + 1

    @property
    def upper_cliques(self) -> bool:
        return self.tau >= 1 + 1 / self.alpha

    @property
    def part_two(self) -> bool:
        c = self.C_U
        if c is None or c <= 2:
            return False
        return (self.alpha > c ** 3
                and self.tau >= max(self.alpha ** 2 + 1, 2 * c ** 3 / (c ** 2 - 4)))

    @property
    def j0(self) -> int:
        """The integer with alpha**-j0 < tau - 1 <= alpha**(1-j0)."""
        return scale_index(self.tau - 1, self.alpha)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "tau": self.tau, "C_U": self.C_U,
                "basic": self.basic, "part_two": self.part_two, "j0": self.j0}


@dataclass(eq=False)
class FillingGraph:
    space: FiniteMetricSpace | None
    nets: NetHierarchy
    tau: float
    vpoint: np.ndarray
    vlevel: np.ndarray
    edges: np.ndarray          # (E, 3) rows (u, v, kind) with u < v
    parent: np.ndarray         # -1 at the root
    _index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self._index = {(int(p), int(l)): i for i, (p, l) in enumerate(zip(self.vpoint, self.vlevel))}
        n = len(self.vpoint)
        self.level_start = np.searchsorted(self.vlevel, np.arange(self.depth + 2))
        self.neighbors = [[] for _ in range(n)]
        self.children = [[] for _ in range(n)]
        for u, v, kind in self.edges:
            self.neighbors[u].append(v)
            self.neighbors[v].append(u)
            if kind == VERTICAL:
                lo, hi = (u, v) if self.vlevel[u] < self.vlevel[v] else (v, u)
                self.children[lo].append(hi)
        self.neighbors = [np.array(sorted(a), dtype=int) for a in self.neighbors]
        self.children = [np.array(sorted(a), dtype=int) for a in self.children]
        self._edge_set = {(int(u), int(v)) for u, v, _ in self.edges}

    @property
    def alpha(self) -> float:
        return self.nets.alpha

    @property
    def depth(self) -> int:
        return self.nets.depth

    @property
    def regime(self) -> ParamRegime:
        return ParamRegime(self.alpha, self.tau)

    @property
    def n_vertices(self) -> int:
        return len(self.vpoint)

    @property
    def root(self) -> int:
        return 0

    def vid(self, v) -> int:
        if isinstance(v, (int, np.integer)):
            return int(v)
        return self._index[(int(v[0]), int(v[1]))]

    def vertex(self, i: int) -> Vertex:
        return Vertex(int(self.vpoint[i]), int(self.vlevel[i]))

    def level_ids(self, n: int) -> np.ndarray:
        return np.arange(self.level_start[n], self.level_start[n + 1])

    def adjacent(self, u, v) -> bool:
        a, b = sorted((self.vid(u), self.vid(v)))
        return (a, b) in self._edge_set

    def adjacency_matrix(self, weights=None) -> sparse.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        w = np.ones(len(u)) if weights is None else weights
        n = self.n_vertices
        m = sparse.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])), shape=(n, n))
        return m.tocsr()


def build_filling(space: FiniteMetricSpace, alpha: float, tau: float, depth: int,
                  nets: NetHierarchy | None = None) -> FillingGraph:
    regime = ParamRegime(alpha, tau)
    if not regime.basic:
        warnings.warn(f"alpha={alpha}, tau={tau} outside the regime alpha>=2, tau>=2alpha^2+1",
                      RegimeWarning, stacklevel=2)
    if nets is None:
        nets = build_nested_nets(space, alpha, depth)
    d = space.dist
    vpoint, vlevel = [], []
    for n, level in enumerate(nets.levels):
        if not level:
            raise EmptyLevel(f"net level {n} is empty")
        vpoint += level
        vlevel += [n] * len(level)
    vpoint = np.asarray(vpoint, dtype=int)
    vlevel = np.asarray(vlevel, dtype=int)
    start = np.searchsorted(vlevel, np.arange(depth + 2))

    edges = []
    for n in range(depth + 1):
        ids = np.arange(start[n], start[n + 1])
        pts = vpoint[ids]
        sub = d[np.ix_(pts, pts)]
        i, j = np.nonzero(np.triu(sub < 2 * tau * alpha ** -n, k=1))
        edges += [(ids[a], ids[b], HORIZONTAL) for a, b in zip(i, j)]
        if n < depth:
            ids2 = np.arange(start[n + 1], start[n + 2])
            sub = d[np.ix_(pts, vpoint[ids2])]
            i, j = np.nonzero(sub < alpha ** -n + alpha ** -(n + 1))
            edges += [(ids[a], ids2[b], VERTICAL) for a, b in zip(i, j)]
    edges = np.array(sorted(edges), dtype=int).reshape(-1, 3)

    parent = np.full(len(vpoint), -1, dtype=int)
    for n in range(1, depth + 1):
        up = np.arange(start[n - 1], start[n])
        for i in range(start[n], start[n + 1]):
            dd = d[vpoint[i], vpoint[up]]
            ok = np.flatnonzero(dd < alpha ** -(n - 1))
            if not len(ok):
                raise EmptyLevel(f"no tree parent for vertex {(int(vpoint[i]), n)}")
            # nearest valid parent; lexsort breaks distance ties by point id
            best = ok[np.lexsort((vpoint[up[ok]], dd[ok]))[0]]
            parent[i] = up[best]
    return FillingGraph(space, nets, float(tau), vpoint, vlevel, edges, parent)


def descendants(g: FillingGraph, v, n: int) -> set[Vertex]:
    """D_n(v): level-n vertices reachable from v by a vertically descending path."""
    i = g.vid(v)
    m = int(g.vlevel[i])
    if n > g.depth:
        raise DepthExceeded(f"level {n} beyond truncation depth {g.depth}")
    if n <= m:
        raise ValueError(f"target level {n} must exceed the vertex level {m}")
    return {g.vertex(k) for k in descendant_ids(g, i, n)}


def descendant_ids(g: FillingGraph, i: int, n: int) -> np.ndarray:
    frontier = np.array([i])
    for _ in range(int(g.vlevel[i]), n):
        frontier = np.unique(np.concatenate([g.children[k] for k in frontier]))
    return frontier


def tree_branch(g: FillingGraph, v) -> list[Vertex]:
    i = g.vid(v)
    path = [i]
    while g.parent[path[-1]] >= 0:
        path.append(int(g.parent[path[-1]]))
    return [g.vertex(k) for k in reversed(path)]


def meet_vertex(g: FillingGraph, b1: list, b2: list) -> Vertex:
    """Deepest vertex of b1 equal or adjacent to the same-level vertex of b2."""
    for ell in range(min(len(b1), len(b2)) - 1, -1, -1):
        a, b = g.vid(b1[ell]), g.vid(b2[ell])
        if a == b or g.adjacent(a, b):
            return g.vertex(a)
    raise ValueError("branches do not share the root")


# ---------------------------------------------------------------- checks

def check_edge_rules(g: FillingGraph) -> bool:
    """Brute-force rescan of every same/adjacent-level pair against the stored edges."""
    d = g.space.dist
    alpha, tau = g.alpha, g.tau
    found = set()
    n = g.n_vertices
    for a in range(n):
        for b in range(a + 1, n):
            la, lb = g.vlevel[a], g.vlevel[b]
            dist = d[g.vpoint[a], g.vpoint[b]]
            if la == lb and dist < 2 * tau * alpha ** -la:
                found.add((a, b))
            elif abs(la - lb) == 1 and dist < alpha ** -la + alpha ** -lb:
                found.add((a, b))
    return found == g._edge_set


def check_upper_cliques(g: FillingGraph) -> int:
    """Count vertices whose upper neighbours are not pairwise adjacent."""
    bad = 0
    for i in range(g.n_vertices):
        ups = [k for k in g.neighbors[i] if g.vlevel[k] == g.vlevel[i] - 1]
        for x in range(len(ups)):
            for y in range(x + 1, len(ups)):
                if not g.adjacent(ups[x], ups[y]):
                    bad += 1
    return bad


def check_tree(g: FillingGraph) -> bool:
    """Each parent is one level up, a vertical neighbour, and within alpha**-(level-1)."""
    d = g.space.dist
    for i in range(1, g.n_vertices):
        p = g.parent[i]
        if p < 0 or g.vlevel[p] != g.vlevel[i] - 1 or not g.adjacent(i, p):
            return False
        if not d[g.vpoint[i], g.vpoint[p]] < g.alpha ** -(int(g.vlevel[i]) - 1):
            return False
    return g.parent[0] == -1 and len(tree_branch(g, g.n_vertices - 1)) == g.depth + 1


def bounded_overlap(g: FillingGraph) -> list[int]:
    """Per level n, the max number of balls B(x, tau alpha**-n), x in A_n, covering one point."""
    d = g.space.dist
    counts = []
    for n in range(g.depth + 1):
        pts = g.vpoint[g.level_ids(n)]
        counts.append(int((d[:, pts] < g.tau * g.alpha ** -n).sum(axis=1).max()))
    return counts


def unsaturated_levels(g: FillingGraph) -> list[int]:
    """Levels whose tau-balls no longer swallow the whole space."""
    return [n for n in range(1, g.depth + 1) if g.tau * g.alpha ** -n < g.space.diameter]


def overlap_window(g: FillingGraph) -> list[int]:
    """Levels where the overlap count is informative.

    Above the window every tau-ball is all of Z; below it, alpha**-n is
    under twice the sample resolution and the nets have stopped refining,
    so counts grow with tau alpha**-n / resolution rather than with n.
    """
    floor = 2 * g.space.resolution
    return [n for n in unsaturated_levels(g) if g.alpha ** -n >= floor]


def overlap_drift(g: FillingGraph) -> float:
    """max / min overlap count over the window (1.0 when the window has <= 1 level)."""
    counts = bounded_overlap(g)
    window = [counts[n] for n in overlap_window(g)]
    return max(window) / min(window) if window else 1.0


def max_degree(g: FillingGraph) -> list[int]:
    return [int(max(len(g.neighbors[i]) for i in g.level_ids(n))) for n in range(g.depth + 1)]


def hop_distances(g: FillingGraph) -> np.ndarray:
    from scipy.sparse.csgraph import shortest_path
    return shortest_path(g.adjacency_matrix(), method="D", unweighted=True)


# ---------------------------------------------------------------- export

def graph_to_dict(g: FillingGraph) -> dict:
    vp, vl = g.vpoint, g.vlevel
    return {
        "params": {"alpha": g.alpha, "tau": g.tau, "depth": g.depth},
        "levels": [list(map(int, lvl)) for lvl in g.nets.levels],
        "edges": [[int(vp[u]), int(vl[u]), int(vp[v]), int(vl[v]), _KIND_NAMES[int(k)]]
                  for u, v, k in g.edges],
        "tree": [[int(vp[i]), int(vl[i]), int(vp[g.parent[i]])] for i in range(1, g.n_vertices)],
    }


def graph_from_dict(doc: dict, space: FiniteMetricSpace | None = None) -> FillingGraph:
    prm = doc["params"]
    nets = NetHierarchy(float(prm["alpha"]), int(prm["depth"]), tuple(tuple(l) for l in doc["levels"]))
    vpoint = np.array([p for lvl in nets.levels for p in lvl], dtype=int)
    vlevel = np.array([n for n, lvl in enumerate(nets.levels) for _ in lvl], dtype=int)
    index = {(int(p), int(l)): i for i, (p, l) in enumerate(zip(vpoint, vlevel))}
    kinds = {name: k for k, name in _KIND_NAMES.items()}
    edges = sorted((index[(p1, l1)], index[(p2, l2)], kinds[kind]) for p1, l1, p2, l2, kind in doc["edges"])
    parent = np.full(len(vpoint), -1, dtype=int)
    for p, l, pp in doc["tree"]:
        parent[index[(p, l)]] = index[(pp, l - 1)]
    return FillingGraph(space, nets, float(prm["tau"]), vpoint, vlevel,
                        np.array(edges, dtype=int).reshape(-1, 3), parent)


def _to_dot(g: FillingGraph) -> str:
    lines = ["graph filling {", "  rankdir=TB;"]
    for n in range(g.depth + 1):
        names = " ".join(f'"{g.vpoint[i]}@{n}";' for i in g.level_ids(n))
        lines.append(f"  {{ rank=same; {names} }}")
    for u, v, k in g.edges:
        style = " [style=dashed]" if k == HORIZONTAL else ""
        lines.append(f'  "{g.vpoint[u]}@{g.vlevel[u]}" -- "{g.vpoint[v]}@{g.vlevel[v]}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(g: FillingGraph, format: str = "json") -> bytes:
    if format == "json":
        return json.dumps(graph_to_dict(g), sort_keys=True).encode()
    if format == "dot":
        return _to_dot(g).encode()
    raise UnknownFormat(f"unknown export format {format!r}; expected json or dot")


def graphs_equal(a: FillingGraph, b: FillingGraph) -> bool:
    return (a.alpha == b.alpha and a.tau == b.tau and a.nets.levels == b.nets.levels
            and np.array_equal(a.edges, b.edges) and np.array_equal(a.parent, b.parent))


def bfs_levels(g: FillingGraph) -> np.ndarray:
    """Hop distance from the root; used to confirm connectivity."""
    dist = np.full(g.n_vertices, -1)
    dist[0] = 0
    q = deque([0])
    while q:
        u = q.popleft()
        for v in g.neighbors[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist
