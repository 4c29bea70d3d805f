"""Empirical constants for the weight conditions (H1)-(H4), the critical
exponent, the perfectness gap and a four-point hyperbolicity estimate."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .filling import FillingGraph, descendant_ids, meet_vertex, tree_branch
from .rho_metric import drho_from, representative, tail_bound
from .weights import WeightAssignment, free_mask

P_BRACKET = (1e-3, 64.0)
P_TOL = 1e-6
MAX_CELLS = 2000


@dataclass
class H1Result:
    eta_minus: float
    eta_plus: float
    holds: bool
    witness: tuple | None
    saturated_levels: tuple


@dataclass
class H3Result:
    K1: float
    witness: tuple | None
    ratios: np.ndarray
    skipped: int = 0

    def quantiles(self) -> dict:
        if not len(self.ratios):
            return {}
        q = np.quantile(self.ratios, [0.0, 0.25, 0.5, 0.75, 1.0])
        return dict(zip(["min", "q25", "median", "q75", "max"], map(float, q)))


@dataclass
class CriticalExponent:
    median: float
    min: float
    max: float
    values: np.ndarray
    no_root: int
    cells: int = 0


@dataclass
class ConditionReport:
    h1: H1Result
    K0: float
    h3: H3Result | None = None
    h4_grid: list = field(default_factory=list)
    p_star: CriticalExponent | None = None
    delta: float | None = None
    n_gap: int | None = None
    meet_sensitivity: dict | None = None

    def to_json(self) -> dict:
        h1 = self.h1
        out = {
            "h1": {"eta_minus": h1.eta_minus, "eta_plus": h1.eta_plus, "holds": h1.holds,
                   "witness": list(h1.witness) if h1.witness else None,
                   "saturated_levels": list(h1.saturated_levels)},
            "h2": {"K0": self.K0},
            "h4": {"grid": [[float(p), float(k)] for p, k in self.h4_grid]},
            "delta": self.delta,
            "n_gap": self.n_gap,
        }
        if self.h3 is not None:
            out["h3"] = {"K1": self.h3.K1, "witness": list(self.h3.witness) if self.h3.witness else None,
                         "skipped": self.h3.skipped, "ratio_quantiles": self.h3.quantiles(),
                         "meet_sensitivity": self.meet_sensitivity}
        if self.p_star is not None:
            ps = self.p_star
            out["p_star"] = {"median": ps.median, "min": ps.min, "max": ps.max,
                             "cells": ps.cells, "no_root": ps.no_root}
        return out


def check_h1(g: FillingGraph, w: WeightAssignment) -> H1Result:
    mask = free_mask(g, w.saturated_levels)
    ids = np.flatnonzero(mask)
    vals = w.rho[ids]
    hi = int(ids[vals.argmax()])
    holds = bool(vals.max() < 1)
    return H1Result(float(vals.min()), float(vals.max()), holds,
                    None if holds else tuple(g.vertex(hi)), w.saturated_levels)


def check_h2(g: FillingGraph, w: WeightAssignment) -> float:
    """Largest pi ratio across an edge, edges touching saturated levels excluded."""
    u, v = g.edges[:, 0], g.edges[:, 1]
    keep = np.ones(len(u), dtype=bool)
    for n in w.saturated_levels:
        keep &= (g.vlevel[u] != n) & (g.vlevel[v] != n)
    a, b = w.pi[u[keep]], w.pi[v[keep]]
    return float(np.maximum(a / b, b / a).max())


def sample_pairs(n_points: int, count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Distinct unordered pairs; all of them when there are few enough."""
    total = n_points * (n_points - 1) // 2
    if total <= count:
        return list(itertools.combinations(range(n_points), 2))
    seen = set()
    while len(seen) < count:
        a, b = rng.choice(n_points, size=2, replace=False)
        seen.add((min(a, b), max(a, b)))
    return sorted((int(a), int(b)) for a, b in seen)


def meet_for_points(g: FillingGraph, x: int, y: int, rep_level: int) -> tuple[int, int, int]:
    """(rep of x, rep of y, v_xy) as vertex ids."""
    a, b = representative(g, x, rep_level), representative(g, y, rep_level)
    v = meet_vertex(g, tree_branch(g, a), tree_branch(g, b))
    return a, b, g.vid(v)


def check_h3(g: FillingGraph, w: WeightAssignment, pairs, rep_level: int | None = None) -> H3Result:
    """K1 = max over pairs of pi(v_xy) / (d_rho(reps) + tail bound)."""
    rep_level = g.depth if rep_level is None else rep_level
    tb = tail_bound(g, w, rep_level)
    pairs = [(int(x), int(y)) for x, y in pairs if x != y]
    triples = [meet_for_points(g, x, y, rep_level) for x, y in pairs]
    srcs = sorted({a for a, _, _ in triples})
    rows = dict(zip(srcs, drho_from(g, w, srcs))) if srcs else {}
    ratios = np.array([w.pi[v] / (rows[a][b] + tb) for a, b, v in triples])
    if not len(ratios):
        return H3Result(float("nan"), None, ratios)
    k = int(ratios.argmax())
    return H3Result(float(ratios[k]), pairs[k], ratios)


def _upward_cone(g: FillingGraph, i: int, cache: dict) -> list[set]:
    """Per level, every vertex reachable from i by steps to a valid parent (d < alpha**-(l-1))."""
    if i in cache:
        return cache[i]
    d = g.space.dist
    cone = [set() for _ in range(int(g.vlevel[i]) + 1)]
    cone[-1] = {i}
    for lvl in range(int(g.vlevel[i]), 0, -1):
        ids = g.level_ids(lvl - 1)
        pts = g.vpoint[ids]
        below = np.array([g.vpoint[k] for k in cone[lvl]])
        near = (d[np.ix_(below, pts)] < g.alpha ** -(lvl - 1)).any(axis=0)
        cone[lvl - 1] = {int(k) for k in ids[near]}
    cache[i] = cone
    return cone


def meet_sensitivity(g: FillingGraph, w: WeightAssignment, pairs, rep_level: int | None = None) -> dict:
    """How much pi(v_xy) depends on the choice of descending paths.

    The tree fixes one parent per vertex; any vertex at the previous level
    within alpha**-(l-1) would do. Using the same rule as ``meet_vertex``
    (same vertex or horizontal neighbours), this finds the deepest level where
    some pair of alternative branches meets, and compares pi over the x-side
    meets found there together with the tree meet.
    """
    rep_level = g.depth if rep_level is None else rep_level
    d = g.space.dist
    cache: dict = {}
    out = {"pairs": 0, "with_alternatives": 0, "max_pi_ratio": 1.0, "max_level_shift": 0}
    for x, y in pairs:
        if x == y:
            continue
        a, b, v = meet_for_points(g, int(x), int(y), rep_level)
        ca, cb = _upward_cone(g, a, cache), _upward_cone(g, b, cache)
        for lvl in range(min(len(ca), len(cb)) - 1, -1, -1):
            ua, ub = sorted(ca[lvl]), sorted(cb[lvl])
            close = d[np.ix_(g.vpoint[ua], g.vpoint[ub])] < 2 * g.tau * g.alpha ** -lvl
            if close.any():
                break
        alts = {ua[k] for k in np.flatnonzero(close.any(axis=1))} | {v}
        out["pairs"] += 1
        if len(alts) > 1:
            out["with_alternatives"] += 1
        vals = w.pi[sorted(alts)]
        out["max_pi_ratio"] = max(out["max_pi_ratio"], float(vals.max() / vals.min()))
        out["max_level_shift"] = max(out["max_level_shift"], abs(lvl - int(g.vlevel[v])))
    return out


def sample_cells(g: FillingGraph, seed: int = 1729, cap: int = MAX_CELLS) -> list[tuple[int, int]]:
    """(vertex id, n) for every vertex at levels 1..depth-2 and n in {m+2, depth}."""
    cells = []
    for m in range(1, g.depth - 1):
        for n in sorted({m + 2, g.depth}):
            cells += [(int(i), n) for i in g.level_ids(m)]
    if len(cells) > cap:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(cells), size=cap, replace=False))
        cells = [cells[k] for k in keep]
    return cells


def descendant_ratios(g: FillingGraph, w: WeightAssignment, cell) -> np.ndarray:
    i, n = cell
    return w.pi[descendant_ids(g, i, n)] / w.pi[i]


def power_sum(ratios: np.ndarray, p: float) -> float:
    return float(np.sum(ratios ** p))


def check_h4(g: FillingGraph, w: WeightAssignment, p: float, cells) -> float:
    """K2(p) = max over cells of max(S, 1/S), S the normalised descendant power sum."""
    if p <= 0:
        raise ValueError("p must be positive")
    k2 = 1.0
    for cell in cells:
        s = power_sum(descendant_ratios(g, w, cell), p)
        k2 = max(k2, s, 1 / s)
    return k2


def cell_exponent(ratios: np.ndarray, lo: float = P_BRACKET[0], hi: float = P_BRACKET[1],
                  tol: float = P_TOL) -> float | None:
    """Root of sum(ratios**p) = 1 by bisection, or None when the bracket has no sign change."""
    f_lo, f_hi = power_sum(ratios, lo) - 1, power_sum(ratios, hi) - 1
    if f_lo < 0 or f_hi > 0:
        return None
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if power_sum(ratios, mid) > 1:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def critical_exponent(g: FillingGraph, w: WeightAssignment, cells) -> CriticalExponent:
    values, no_root = [], 0
    for cell in cells:
        p = cell_exponent(descendant_ratios(g, w, cell))
        if p is None:
            no_root += 1
        else:
            values.append(p)
    vals = np.array(values)
    if not len(vals):
        nan = float("nan")
        return CriticalExponent(nan, nan, nan, vals, no_root, len(cells))
    return CriticalExponent(float(np.median(vals)), float(vals.min()), float(vals.max()),
                            vals, no_root, len(cells))


def perfectness_gap(K2: float, eta_plus: float, p: float) -> int:
    """Smallest integer N > log(K2) / (p log(1/eta_plus))."""
    if not 0 < eta_plus < 1:
        raise ValueError("eta_plus must lie in (0, 1)")
    bound = math.log(K2) / (p * math.log(1 / eta_plus))
    return math.floor(bound) + 1


def four_point_defect(d: np.ndarray, q) -> float:
    x, y, z, t = q
    s = sorted((d[x, y] + d[z, t], d[x, z] + d[y, t], d[x, t] + d[y, z]))
    return (s[2] - s[1]) / 2


def delta_hyperbolicity(hops: np.ndarray, quadruples) -> float:
    """Max four-point defect over the given quadruples of the hop metric."""
    return max((four_point_defect(hops, q) for q in quadruples), default=0.0)


def sample_quadruples(n: int, count: int | None, rng: np.random.Generator):
    if count is None or math.comb(n, 4) <= count:
        return itertools.combinations(range(n), 4)
    return (tuple(rng.choice(n, size=4, replace=False)) for _ in range(count))


def verify(g: FillingGraph, w: WeightAssignment, *, p_grid=None, n_pairs: int = 200,
           rep_level: int | None = None, seed: int = 1729, n_quads: int = 20000,
           hops: np.ndarray | None = None) -> ConditionReport:
    """Run every condition check with one seeded generator."""
    rng = np.random.default_rng(seed)
    h1 = check_h1(g, w)
    report = ConditionReport(h1, check_h2(g, w))
    cells = sample_cells(g, seed)
    if h1.holds:
        pairs = sample_pairs(g.space.n, n_pairs, rng)
        report.h3 = check_h3(g, w, pairs, rep_level)
        report.meet_sensitivity = meet_sensitivity(g, w, pairs, rep_level)
        report.p_star = critical_exponent(g, w, cells)
    if p_grid is None:
        centre = report.p_star.median if report.p_star and not math.isnan(report.p_star.median) else 1.0
        p_grid = [centre - 0.25, centre, centre + 0.25]
    report.h4_grid = [(float(p), check_h4(g, w, p, cells)) for p in p_grid if p > 0]
    if h1.holds and report.p_star and not math.isnan(report.p_star.median):
        k2 = check_h4(g, w, report.p_star.median, cells)
        report.n_gap = perfectness_gap(k2, h1.eta_plus, report.p_star.median)
    if hops is None:
        from .filling import hop_distances
        hops = hop_distances(g)
    report.delta = float(delta_hyperbolicity(hops, sample_quadruples(g.n_vertices, n_quads, rng)))
    return report
