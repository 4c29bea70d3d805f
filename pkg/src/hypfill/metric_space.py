"""Finite metric spaces: validation, rescaling, and sample-level estimates of
the doubling and uniform-perfectness constants."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateSpace, DiameterOutOfRange, MetricViolation

DEFAULT_TARGET = 0.9

# Relative slack for the triangle check only; floating-point sums of
# collinear distances can overshoot by a few ulps.
_TRIANGLE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    dist: np.ndarray
    label: str = ""

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def points(self) -> range:
        return range(self.n)

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @property
    def resolution(self) -> float:
        """Smallest positive inter-point distance."""
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    def to_json(self) -> dict:
        return {"n": self.n, "diam": self.diameter, "label": self.label}


@dataclass
class PerfectnessReport:
    C_U: float | None
    degenerate: bool
    r_min: float
    witnesses: list = field(default_factory=list)


def _check_axioms(d: np.ndarray) -> None:
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise MetricViolation(f"distance array must be square, got shape {d.shape}")
    if n < 2:
        raise MetricViolation("need at least two points")
    if not np.all(np.isfinite(d)):
        raise MetricViolation("distance array contains non-finite entries")
    diag = np.diag(d)
    if np.any(diag != 0):
        i = int(np.flatnonzero(diag)[0])
        raise MetricViolation(f"nonzero diagonal at {i}: {d[i, i]}", triple=(i, i, i))
    if np.any(d < 0):
        i, j = map(int, np.argwhere(d < 0)[0])
        raise MetricViolation(f"negative distance d({i},{j}) = {d[i, j]}", triple=(i, j, j))
    asym = d != d.T
    if np.any(asym):
        i, j = map(int, np.argwhere(asym)[0])
        raise MetricViolation(f"asymmetric: d({i},{j}) = {d[i, j]} != d({j},{i}) = {d[j, i]}",
                              triple=(i, j, i))
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0):
        i, j = map(int, np.argwhere((d == 0) & off)[0])
        raise MetricViolation(f"distinct points {i},{j} at distance 0", triple=(i, j, j))
    slack = _TRIANGLE_RTOL * float(d.max())
    for i in range(n):
        # bad[j, k]: d(i,k) > d(i,j) + d(j,k)
        bad = d[i][None, :] > d[i][:, None] + d + slack
        if bad.any():
            j, k = map(int, np.argwhere(bad)[0])
            raise MetricViolation(
                f"triangle inequality fails on ({i},{j},{k}): "
                f"d({i},{k})={d[i, k]} > d({i},{j})+d({j},{k})={d[i, j] + d[j, k]}",
                triple=(i, j, k))


def from_matrix(values, label: str = "", normalize: float | None = None) -> FiniteMetricSpace:
    """Validate a square distance matrix and wrap it.

    With ``normalize`` set, the matrix is rescaled to that diameter instead of
    rejecting diameters outside (0, 1).
    """
    d = np.array(values, dtype=float)
    _check_axioms(d)
    d.setflags(write=False)
    space = FiniteMetricSpace(d, label)
    if normalize is not None:
        return normalize_diameter(space, normalize)
    diam = space.diameter
    if not 0 < diam < 1:
        raise DiameterOutOfRange(f"diameter {diam} not in (0, 1); rescale first")
    return space


def normalize_diameter(space: FiniteMetricSpace, target: float = DEFAULT_TARGET) -> FiniteMetricSpace:
    if not 0 < target < 1:
        raise DiameterOutOfRange(f"target diameter {target} not in (0, 1)")
    diam = float(space.dist.max())
    if diam <= 0:
        raise DegenerateSpace("all distances are zero")
    if diam == target:
        return space
    d = space.dist * (target / diam)
    # pin the extremal pairs so the new diameter is exactly the target
    d[space.dist == diam] = target
    d.setflags(write=False)
    return FiniteMetricSpace(d, space.label)


def snowflake(space: FiniteMetricSpace, epsilon: float) -> FiniteMetricSpace:
    """The metric d**epsilon, quasisymmetric to d."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if epsilon == 1:
        return space
    d = space.dist ** epsilon
    d.setflags(write=False)
    label = f"{space.label}^{epsilon:g}" if space.label else f"snowflake^{epsilon:g}"
    return FiniteMetricSpace(d, label)


def pairwise(coords, metric: str = "euclidean") -> np.ndarray:
    """Distance matrix for a point cloud.

    ``arc`` expects one angle (radians) per point and returns unit-circle arc
    length.
    """
    x = np.asarray(coords, dtype=float)
    if metric == "arc":
        theta = x.reshape(-1) % (2 * np.pi)
        gap = np.abs(theta[:, None] - theta[None, :])
        return np.minimum(gap, 2 * np.pi - gap)
    if x.ndim == 1:
        x = x[:, None]
    diff = x[:, None, :] - x[None, :, :]
    if metric == "euclidean":
        return np.sqrt((diff ** 2).sum(axis=-1))
    if metric == "linf":
        return np.abs(diff).max(axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


def from_points(coords, metric: str = "euclidean", label: str = "",
                target: float | None = DEFAULT_TARGET) -> FiniteMetricSpace:
    return from_matrix(pairwise(coords, metric), label=label, normalize=target)


def load(path, normalize: float | None = None) -> FiniteMetricSpace:
    """Read a header-free CSV distance matrix or a JSON point cloud."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if "dist" in doc:
            return from_matrix(doc["dist"], label=doc.get("label", path.stem), normalize=normalize)
        target = normalize if normalize is not None else DEFAULT_TARGET
        return from_points(doc["points"], doc.get("metric", "euclidean"),
                           label=doc.get("label", path.stem), target=target)
    with path.open(newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return from_matrix(rows, label=path.stem, normalize=normalize)


def estimate_uniform_perfectness(space: FiniteMetricSpace, radius_grid_size: int = 16) -> PerfectnessReport:
    """Smallest C_U making every sampled annulus B(z,r) minus B(z,r/C_U) non-empty.

    Radii run geometrically over (r_min, diam/2), where r_min is the largest
    nearest-neighbour distance: below it some ball is a singleton and no
    finite C_U works. The annulus {w : r/C <= d(z,w) < r} is non-empty iff
    C >= r / m(z,r) with m the largest distance below r, so the supremum of
    that ratio is returned exactly.
    """
    d = space.dist
    n = space.n
    nn = np.where(np.eye(n, dtype=bool), np.inf, d).min(axis=1)
    r_min = float(nn.max())
    r_max = space.diameter / 2
    if r_min >= r_max:
        return PerfectnessReport(None, True, r_min, witnesses=[(int(nn.argmax()), r_max)])
    # open lower end: the first radius sits one grid step above r_min
    radii = np.geomspace(r_min, r_max, radius_grid_size + 1)[1:]
    radii[-1] = np.nextafter(r_max, 0)
    worst, witness = 1.0, None
    witnesses = []
    for r in radii:
        inside = np.where(d < r, d, 0.0)
        m = inside.max(axis=1)
        if np.any(m == 0):
            z = int(np.flatnonzero(m == 0)[0])
            witnesses.append((z, float(r)))
            continue
        ratio = r / m
        z = int(ratio.argmax())
        if ratio[z] > worst:
            worst, witness = float(ratio[z]), (z, float(r))
    if witnesses:
        return PerfectnessReport(None, True, r_min, witnesses=witnesses)
    return PerfectnessReport(worst, False, r_min, witnesses=[witness] if witness else [])


def _greedy_packing(d_ball: np.ndarray, sep: float) -> int:
    chosen = []
    for i in range(d_ball.shape[0]):
        if all(d_ball[i, j] >= sep for j in chosen):
            chosen.append(i)
    return len(chosen)


def estimate_doubling(space: FiniteMetricSpace, n_radii: int = 12, max_centers: int = 64) -> int:
    """Largest greedy r/2-separated subset of a ball B(z, r) over sampled (z, r).

    Centers are an evenly strided subset of the points (all of them for small
    spaces); radii are geometric between the resolution and twice the
    diameter.
    """
    d = space.dist
    n = space.n
    centers = range(0, n, max(1, n // max_centers))
    radii = np.geomspace(space.resolution, 2 * space.diameter, n_radii)
    best = 1
    for z in centers:
        for r in radii:
            members = np.flatnonzero(d[z] < r)
            if len(members) <= best:
                continue
            best = max(best, _greedy_packing(d[np.ix_(members, members)], r / 2))
    return best
