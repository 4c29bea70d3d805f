"""Nested maximal separated nets A_0 c A_1 c ... c A_N."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionExceeded
from .metric_space import FiniteMetricSpace


@dataclass(frozen=True, eq=False)
class NetHierarchy:
    alpha: float
    depth: int
    levels: tuple[tuple[int, ...], ...]

    def scale(self, n: int) -> float:
        return self.alpha ** -n

    def members(self, n: int) -> np.ndarray:
        return np.asarray(self.levels[n], dtype=int)


def useful_depth(space: FiniteMetricSpace, alpha: float) -> int:
    """First level whose scale drops below half the resolution."""
    return max(1, math.ceil(math.log(2 / space.resolution) / math.log(alpha)))


def build_nested_nets(space: FiniteMetricSpace, alpha: float, depth: int) -> NetHierarchy:
    """Greedy nested nets scanned in ascending point id.

    A_{n+1} starts as A_n; each remaining point joins iff it is at distance
    >= alpha**-(n+1) from every current member.
    """
    if alpha < 2:
        raise ValueError(f"alpha must be >= 2, got {alpha}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if alpha ** -depth < space.resolution:
        warnings.warn(
            f"alpha^-{depth} = {alpha ** -depth:.3g} is below the sample resolution "
            f"{space.resolution:.3g}; deeper levels stop changing", ResolutionExceeded, stacklevel=2)
    d = space.dist
    n_pts = space.n
    levels = []
    current: list[int] = []
    for n in range(depth + 1):
        sep = alpha ** -n
        in_net = np.zeros(n_pts, dtype=bool)
        in_net[current] = True
        # min distance from each point to the current net
        gap = d[:, current].min(axis=1) if current else np.full(n_pts, np.inf)
        for z in range(n_pts):
            if in_net[z] or gap[z] < sep:
                continue
            current.append(z)
            in_net[z] = True
            np.minimum(gap, d[z], out=gap)
        levels.append(tuple(current))
    return NetHierarchy(float(alpha), depth, tuple(levels))


def check_nets(space: FiniteMetricSpace, nets: NetHierarchy) -> dict:
    """Exhaustive separation, covering and nesting check; returns violation counts."""
    d = space.dist
    out = {"separation": 0, "covering": 0, "nesting": 0, "root_singleton": len(nets.levels[0]) == 1}
    for n, level in enumerate(nets.levels):
        idx = np.asarray(level)
        sub = d[np.ix_(idx, idx)]
        off = ~np.eye(len(idx), dtype=bool)
        out["separation"] += int(np.count_nonzero(sub[off] < nets.alpha ** -n))
        out["covering"] += int(np.count_nonzero(d[:, idx].min(axis=1) >= nets.alpha ** -n))
        if n and not set(nets.levels[n - 1]) <= set(level):
            out["nesting"] += 1
    return out
