"""Finite-depth boundary map and the bi-Hölder, quasisymmetry, diameter and
Ahlfors-regularity checks on it.

A sample point x is represented by the nearest net point at the
representative level; distances between represented points are d_rho
between those vertices, with an additive tail bound for everything below
the truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filling import FillingGraph, ParamRegime, meet_vertex, scale_index, tree_branch
from .rho_metric import drho_from, drho_matrix, representative, tail_bound
from .weights import WeightAssignment

DYADIC_STEPS = 8  # radii r/2 .. r/256: the used radii span 2**7 > 100, two decades


@dataclass(eq=False)
class BoundarySample:
    points: np.ndarray
    rep_level: int
    reps: np.ndarray
    dmatrix: np.ndarray
    tail_bound: float
    dz: np.ndarray
    meet: np.ndarray          # v_xy vertex id per pair, -1 on the diagonal
    j0: int
    alpha: float
    tau: float = 0.0

    @property
    def resolved_gap(self) -> float:
        """Pairs closer than 2 tau alpha**-rep_level can be joined by one bottom edge."""
        return 2 * self.tau * self.alpha ** -self.rep_level

    def pairs(self):
        n = len(self.points)
        for a in range(n):
            for b in range(a + 1, n):
                yield a, b

    def n_xy(self, a: int, b: int) -> int:
        return scale_index(self.dz[a, b], self.alpha)


@dataclass
class BiHolderResult:
    c: float
    C: float
    tau_minus: float
    tau_plus: float
    slope: float
    violations: int
    pairs: int
    unresolved: int = 0


@dataclass
class Comparability:
    lower: float
    upper: float
    upper_bound: float
    violations: int
    lower_violations: int = 0
    unresolved: int = 0


@dataclass
class Envelope:
    C: float
    t: np.ndarray
    s: np.ndarray
    skipped: int
    violations: int


@dataclass(eq=False)
class BoundaryMeasure:
    level: int
    points: np.ndarray
    masses: np.ndarray
    p: float

    @property
    def total(self) -> float:
        return float(self.masses.sum())


@dataclass
class AhlforsResult:
    C_reg: float
    table: list
    excluded: int
    slope: float
    monotone: bool
    flagged: bool
    radii: list = field(default_factory=list)
    tail_bound: float = 0.0


def build_boundary_sample(g: FillingGraph, w: WeightAssignment, points, rep_level: int | None = None,
                          workers: int | None = None) -> BoundarySample:
    rep_level = g.depth if rep_level is None else rep_level
    points = np.asarray(points, dtype=int)
    dm, tb = drho_matrix(g, w, points, rep_level, workers)
    reps = np.array([representative(g, int(x), rep_level) for x in points], dtype=int)
    branches = {int(r): tree_branch(g, int(r)) for r in np.unique(reps)}
    k = len(points)
    meet = np.full((k, k), -1, dtype=int)
    for a in range(k):
        for b in range(a + 1, k):
            v = g.vid(meet_vertex(g, branches[int(reps[a])], branches[int(reps[b])]))
            meet[a, b] = meet[b, a] = v
    dz = g.space.dist[np.ix_(points, points)]
    return BoundarySample(points, rep_level, reps, dm, tb, dz, meet, ParamRegime(g.alpha, g.tau).j0,
                          g.alpha, g.tau)


def scale_sandwich(bs: BoundarySample, g: FillingGraph) -> dict:
    """Count pairs with level(v_xy) outside [n_xy - |j0| - 1, n_xy + |j0| + 3].

    Pairs whose lower end lies below the representative level cannot be
    judged on the truncation and are exempted.
    """
    j = abs(bs.j0)
    out = {"checked": 0, "exempt": 0, "violations": 0, "worst": None}
    for a, b in bs.pairs():
        nxy = bs.n_xy(a, b)
        lo, hi = nxy - j - 1, nxy + j + 3
        if lo > bs.rep_level:
            out["exempt"] += 1
            continue
        out["checked"] += 1
        lvl = int(g.vlevel[bs.meet[a, b]])
        if not lo <= lvl <= hi:
            out["violations"] += 1
            out["worst"] = (int(bs.points[a]), int(bs.points[b]), lvl, nxy)
    return out


def holder_exponents(eta_minus: float, eta_plus: float, alpha: float) -> tuple[float, float]:
    """(tau_minus, tau_plus) = log(eta) / log(1/alpha)."""
    return math.log(eta_minus) / math.log(1 / alpha), math.log(eta_plus) / math.log(1 / alpha)


def _off_diagonal(bs: BoundarySample):
    iu = np.triu_indices(len(bs.points), k=1)
    dr, dz = bs.dmatrix[iu], bs.dz[iu]
    keep = dr > 0
    return dr[keep], dz[keep], iu[0][keep], iu[1][keep]


def check_biholder(bs: BoundarySample, eta_minus: float, eta_plus: float, alpha: float) -> BiHolderResult:
    """Fitted c, C with c dz^tau_minus <= d_rho <= C dz^tau_plus.

    The fit runs over resolved pairs only: two points within one bottom-level
    horizontal edge of each other get a d_rho that reflects the truncation,
    not their separation. Those pairs are counted in ``unresolved``.
    """
    if not (0 < eta_minus <= eta_plus < 1):
        raise ValueError("eta bounds must satisfy 0 < eta_minus <= eta_plus < 1")
    t_minus, t_plus = holder_exponents(eta_minus, eta_plus, alpha)
    dr, dz, _, _ = _off_diagonal(bs)
    keep = dz >= bs.resolved_gap
    unresolved = int(len(dr) - keep.sum())
    dr, dz = dr[keep], dz[keep]
    if not len(dr):
        nan = float("nan")
        return BiHolderResult(nan, nan, t_minus, t_plus, nan, 0, 0, unresolved)
    c = float((dr / dz ** t_minus).min())
    C = float((dr / dz ** t_plus).max())
    slope = float(np.polyfit(np.log(dz), np.log(dr), 1)[0]) if len(np.unique(dz)) > 1 else float("nan")
    lo_bad = dr < c * dz ** t_minus * (1 - 1e-12)
    hi_bad = dr > C * dz ** t_plus * (1 + 1e-12)
    return BiHolderResult(c, C, t_minus, t_plus, slope, int(lo_bad.sum() + hi_bad.sum()), len(dr),
                          unresolved)


def meet_ratios(bs: BoundarySample, w: WeightAssignment):
    iu = np.triu_indices(len(bs.points), k=1)
    pi_v = w.pi[bs.meet[iu]]
    return bs.dmatrix[iu], pi_v


def check_meet_comparability(bs: BoundarySample, g: FillingGraph, w: WeightAssignment,
                             K1: float | None = None) -> Comparability:
    """Band of d_rho / pi(v_xy); upper end checked against 2/(1-eta_plus) plus tail slack.

    The bounds are checked on every pair. The reported band covers resolved
    pairs only (see ``check_biholder``): below one bottom edge two points may
    share a representative and get d_rho = 0.
    """
    dr, pi_v = meet_ratios(bs, w)
    dz = bs.dz[np.triu_indices(len(bs.points), k=1)]
    keep = dz > 0
    dr, pi_v, dz = dr[keep], pi_v[keep], dz[keep]
    bound = 2 / (1 - w.eta_plus)
    upper_bad = dr > bound * pi_v + bs.tail_bound
    lower_bad = 0
    if K1 is not None:
        lower_bad = int(np.count_nonzero(dr + bs.tail_bound < pi_v / K1 * (1 - 1e-12)))
    resolved = dz >= bs.resolved_gap
    if resolved.any():
        ratio = dr[resolved] / pi_v[resolved]
        lo, hi = float(ratio.min()), float(ratio.max())
    else:
        lo = hi = float("nan")
    return Comparability(lo, hi, bound, int(upper_bad.sum()), lower_bad, int(len(dr) - resolved.sum()))


def sample_triples(n: int, count: int, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    out = []
    for _ in range(count):
        a, b, c = rng.choice(n, size=3, replace=False)
        out.append((int(a), int(b), int(c)))
    return out


def qs_envelope(bs: BoundarySample, triples, tau_plus: float, tau_minus: float) -> Envelope:
    """Smallest C with s <= C max(t**tau_plus, t**tau_minus) over the triples,
    t = dz(x,y)/dz(x,z), s = d_rho(x,y)/d_rho(x,z)."""
    ts, ss, skipped = [], [], 0
    for x, y, z in triples:
        if len({x, y, z}) < 3 or bs.dmatrix[x, z] <= 0 or bs.dz[x, z] <= 0:
            skipped += 1
            continue
        ts.append(bs.dz[x, y] / bs.dz[x, z])
        ss.append(bs.dmatrix[x, y] / bs.dmatrix[x, z])
    t, s = np.array(ts), np.array(ss)
    if not len(t):
        return Envelope(float("nan"), t, s, skipped, 0)
    env = np.maximum(t ** tau_plus, t ** tau_minus)
    C = float((s / env).max())
    violations = int(np.count_nonzero(s > C * env * (1 + 1e-12)))
    return Envelope(C, t, s, skipped, violations)


def build_mu_n(g: FillingGraph, w: WeightAssignment, n: int, p: float) -> BoundaryMeasure:
    """mu_n puts mass pi((x,n))**p on each x in A_n."""
    if n > g.depth:
        raise ValueError(f"level {n} beyond depth {g.depth}")
    if p <= 0:
        raise ValueError("p must be positive")
    ids = g.level_ids(n)
    return BoundaryMeasure(n, g.vpoint[ids].copy(), w.pi[ids] ** p, float(p))


def mu_totals(g: FillingGraph, w: WeightAssignment, p: float, levels=None) -> dict:
    levels = range(2, g.depth + 1) if levels is None else levels
    return {int(n): build_mu_n(g, w, n, p).total for n in levels}


def dyadic_radii(top: float, steps: int = DYADIC_STEPS) -> np.ndarray:
    return top * 2.0 ** -np.arange(1, steps + 1)


def check_ahlfors(g: FillingGraph, w: WeightAssignment, mu: BoundaryMeasure, centers, radii=None,
                  ball_metric: str = "rho", rep_level: int | None = None,
                  trend_tol: float = 0.25) -> AhlforsResult:
    """Table of mu(B(c, r)) / r**p over centres and radii, C_reg = max/min ratio.

    With ``ball_metric='rho'`` balls are taken in d_rho between representatives;
    with ``'dz'`` a d_Z ball is used and r is its d_rho radius about the centre.
    Radii below the smallest positive d_rho between sample vertices are
    excluded and counted; the tail bound is reported alongside. The
    trend flag fires when the per-radius geometric-mean ratio is monotone in r
    with log-log slope beyond ``trend_tol``.
    """
    rep_level = g.depth if rep_level is None else rep_level
    tb = tail_bound(g, w, rep_level)
    centers = np.asarray(centers, dtype=int)
    # A_n is contained in A_rep_level, so each mass point is its own representative
    mass_vid = np.array([g.vid((int(x), rep_level)) for x in mu.points])
    c_vid = np.array([representative(g, int(c), rep_level) for c in centers])
    rows = drho_from(g, w, c_vid)[:, mass_vid]
    positive = rows[rows > 0]
    floor = float(positive.min()) if len(positive) else 0.0
    diam = float(rows.max())
    radii = dyadic_radii(diam) if radii is None else np.asarray(radii, dtype=float)
    table, excluded = [], 0
    if ball_metric == "rho":
        for r in radii:
            if r < floor:
                excluded += len(centers)
                continue
            for k, c in enumerate(centers):
                m = float(mu.masses[rows[k] < r].sum())
                table.append((int(c), float(r), m / r ** mu.p))
    elif ball_metric == "dz":
        dz = g.space.dist[np.ix_(centers, mu.points)]
        for r in radii:
            for k, c in enumerate(centers):
                inside = dz[k] < r
                rr = float(rows[k][inside].max()) if inside.any() else 0.0
                if rr < floor:
                    excluded += 1
                    continue
                table.append((int(c), float(r), float(mu.masses[inside].sum()) / rr ** mu.p))
    else:
        raise ValueError(f"ball_metric must be 'rho' or 'dz', got {ball_metric!r}")
    if not table:
        nan = float("nan")
        return AhlforsResult(nan, table, excluded, nan, False, False, [], tb)
    ratios = np.array([t[2] for t in table])
    used = sorted({t[1] for t in table})
    gmean = np.array([np.exp(np.mean(np.log([t[2] for t in table if t[1] == r]))) for r in used])
    if len(used) > 1:
        slope = float(np.polyfit(np.log(used), np.log(gmean), 1)[0])
        steps = np.diff(gmean)
        monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    else:
        slope, monotone = 0.0, False
    flagged = monotone and abs(slope) > trend_tol
    return AhlforsResult(float(ratios.max() / ratios.min()), table, excluded, slope, monotone, flagged,
                         [float(r) for r in used], tb)


def check_diam_comparison(g: FillingGraph, w: WeightAssignment, vertices, rep_level: int | None = None):
    """Range of diam_rho(reps of B(x, alpha**-n)) / pi((x,n)) over sampled vertices.

    The upper end adds the tail bound to the diameter. Balls holding a single
    sample point are skipped.
    """
    rep_level = g.depth if rep_level is None else rep_level
    tb = tail_bound(g, w, rep_level)
    d = g.space.dist
    lows, highs, skipped = [], [], 0
    all_reps = np.array([representative(g, x, rep_level) for x in range(g.space.n)])
    for v in vertices:
        i = g.vid(v)
        x, n = int(g.vpoint[i]), int(g.vlevel[i])
        members = np.flatnonzero(d[x] < g.alpha ** -n)
        reps = np.unique(all_reps[members])
        if len(reps) < 2:
            skipped += 1
            continue
        rows = drho_from(g, w, reps)[:, reps]
        diam = float(rows.max())
        lows.append(diam / w.pi[i])
        highs.append((diam + tb) / w.pi[i])
    if not lows:
        return float("nan"), float("nan"), skipped
    return float(min(lows)), float(max(highs)), skipped


def check_annuli(space, alpha: float, gap: int, levels, r_min: float = 0.0, points=None) -> dict:
    """Check that every annulus B(x, alpha**-n) minus B(x, alpha**-(n+gap)) holds a sample point.

    Levels with alpha**-n >= diam/2 fall outside the uniform-perfectness
    hypothesis, and levels whose inner radius drops below ``r_min`` are
    below the sample's resolution; both are exempt and counted.
    """
    d = space.dist
    points = range(space.n) if points is None else points
    out = {"checked": 0, "exempt": 0, "empty": 0, "witness": None}
    for n in levels:
        outer, inner = alpha ** -n, alpha ** -(n + gap)
        if outer >= space.diameter / 2 or inner < r_min:
            out["exempt"] += 1
            continue
        for x in points:
            out["checked"] += 1
            row = d[x]
            if not np.any((row >= inner) & (row < outer)):
                out["empty"] += 1
                out["witness"] = (int(x), int(n))
    return out
