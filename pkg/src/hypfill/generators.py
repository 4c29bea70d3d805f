"""Test spaces with known dimension and natural probability measure."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SizeLimit
from .metric_space import DEFAULT_TARGET, FiniteMetricSpace, from_matrix, pairwise

MAX_POINTS = 4096


@dataclass(frozen=True, eq=False)
class GeneratedSpace:
    space: FiniteMetricSpace
    natural_measure: np.ndarray
    known_dimension: float | None
    coords: np.ndarray | None = None

    @property
    def resolution(self) -> float:
        return self.space.resolution

    def to_json(self) -> dict:
        doc = self.space.to_json()
        doc["dist"] = self.space.dist.tolist()
        doc["masses"] = self.natural_measure.tolist()
        doc["known_dimension"] = self.known_dimension
        return doc


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def cantor_points(level: int) -> np.ndarray:
    """Left endpoints of the 2**level surviving intervals, ascending."""
    pts = np.zeros(1)
    for k in range(1, level + 1):
        pts = np.concatenate([pts, pts + 2.0 * 3.0 ** -k])
    return np.sort(pts)


def make_cantor(level: int) -> GeneratedSpace:
    if level < 1:
        raise ValueError("level must be >= 1")
    if level > 12 or 2 ** level > MAX_POINTS:
        raise SizeLimit(f"cantor level {level} gives {2 ** level} points (cap {MAX_POINTS})")
    x = cantor_points(level)
    space = from_matrix(pairwise(x), label=f"cantor-{level}")
    return GeneratedSpace(space, _uniform(len(x)), math.log(2) / math.log(3), x[:, None])


def make_circle(n: int) -> GeneratedSpace:
    """n equally spaced points, arc-length metric scaled to diameter 0.9."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if n > MAX_POINTS:
        raise SizeLimit(f"circle with {n} points exceeds cap {MAX_POINTS}")
    k = np.arange(n)
    steps = np.abs(k[:, None] - k[None, :])
    steps = np.minimum(steps, n - steps)
    # integer step counts keep the antipodal distance exactly at the target
    d = steps * (DEFAULT_TARGET / steps.max())
    d[steps == steps.max()] = DEFAULT_TARGET
    angles = 2 * np.pi * k / n
    space = from_matrix(d, label=f"circle-{n}")
    return GeneratedSpace(space, _uniform(n), 1.0, angles[:, None])


def _gasket_lattice(level: int) -> list[tuple[int, int]]:
    # lattice coordinates (a, b) of a*e1 + b*e2 at side length 2**level
    tris = [(0, 0, 2 ** level)]
    for _ in range(level):
        nxt = []
        for a, b, s in tris:
            h = s // 2
            nxt += [(a, b, h), (a + h, b, h), (a, b + h, h)]
        tris = nxt
    verts = set()
    for a, b, s in tris:
        verts.update({(a, b), (a + s, b), (a, b + s)})
    return sorted(verts, key=lambda ab: (ab[1], ab[0]))


def make_sierpinski(level: int) -> GeneratedSpace:
    """Vertex set of the level-``level`` gasket prefractal, Euclidean, diameter 0.9."""
    if level < 1:
        raise ValueError("level must be >= 1")
    count = 3 * (3 ** level + 1) // 2
    if level > 7 or count > MAX_POINTS:
        raise SizeLimit(f"sierpinski level {level} gives {count} points (cap {MAX_POINTS})")
    lattice = np.array(_gasket_lattice(level), dtype=float)
    scale = DEFAULT_TARGET / 2 ** level
    xy = np.column_stack([lattice[:, 0] + 0.5 * lattice[:, 1],
                          lattice[:, 1] * math.sqrt(3) / 2]) * scale
    d = pairwise(xy)
    # the three corners realise the diameter; pin it against rounding
    d[d >= DEFAULT_TARGET * (1 - 1e-12)] = DEFAULT_TARGET
    space = from_matrix(d, label=f"sierpinski-{level}")
    return GeneratedSpace(space, _uniform(len(xy)), math.log(3) / math.log(2), xy)


def make_interval(n: int) -> GeneratedSpace:
    """n equally spaced points of [0, 1], rescaled to diameter 0.9."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n > MAX_POINTS:
        raise SizeLimit(f"interval with {n} points exceeds cap {MAX_POINTS}")
    k = np.arange(n)
    d = np.abs(k[:, None] - k[None, :]) * (DEFAULT_TARGET / (n - 1))
    d[np.abs(k[:, None] - k[None, :]) == n - 1] = DEFAULT_TARGET
    x = k / (n - 1)
    return GeneratedSpace(from_matrix(d, label=f"interval-{n}"), _uniform(n), 1.0, x[:, None])


GENERATORS = {
    "cantor": make_cantor,
    "circle": make_circle,
    "sierpinski": make_sierpinski,
    "interval": make_interval,
}
