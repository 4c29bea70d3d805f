"""Vertex weights rho, their tree products pi, and the density form omega."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingVertex, NonPositiveWeight, NotAnEdge, ZeroMass
from .filling import FillingGraph

TELESCOPE_TOL = 1e-9


@dataclass(eq=False)
class WeightAssignment:
    rho: np.ndarray
    pi: np.ndarray
    kind: str
    eta_minus: float
    eta_plus: float
    saturated_levels: tuple[int, ...] = ()
    p: float | None = None

    def to_json(self, g: FillingGraph) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "rho": [[int(g.vpoint[i]), int(g.vlevel[i]), float(self.rho[i])] for i in range(len(self.rho))],
            "eta_minus": self.eta_minus,
            "eta_plus": self.eta_plus,
            "saturated_levels": list(self.saturated_levels),
        }


def free_mask(g: FillingGraph, saturated_levels=()) -> np.ndarray:
    """Non-root vertices off the saturated levels."""
    mask = g.vlevel > 0
    for n in saturated_levels:
        mask &= g.vlevel != n
    return mask


def _assignment(g, rho, pi, kind, saturated=(), p=None) -> WeightAssignment:
    vals = rho[free_mask(g, saturated)]
    if not len(vals):
        vals = rho
    return WeightAssignment(rho, pi, kind, float(vals.min()), float(vals.max()), tuple(saturated), p)


def tree_products(g: FillingGraph, rho: np.ndarray) -> np.ndarray:
    """pi(root) = rho(root); pi(v) = rho(v) * pi(parent(v))."""
    pi = np.empty_like(rho)
    pi[0] = rho[0]
    # vertices are stored level by level, so parents are always filled first
    for i in range(1, len(rho)):
        pi[i] = rho[i] * pi[g.parent[i]]
    return pi


def constant_rho(g: FillingGraph, c: float) -> WeightAssignment:
    if not 0 < c < 1:
        raise ValueError(f"constant weight must lie in (0, 1), got {c}")
    rho = np.full(g.n_vertices, float(c))
    return _assignment(g, rho, tree_products(g, rho), "constant")


@dataclass(frozen=True, eq=False)
class MeasureOracle:
    """Point masses on the sample; balls are open d_Z-balls."""
    dist: np.ndarray
    masses: np.ndarray
    p: float
    normalize: bool = field(default=True)

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("regularity exponent p must be positive")
        m = np.asarray(self.masses, dtype=float)
        if np.any(m < 0) or m.sum() <= 0:
            raise ZeroMass("masses must be nonnegative with positive total")
        if self.normalize:
            m = m / m.sum()
        object.__setattr__(self, "masses", m)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def mass(self, center: int, radius: float) -> float:
        return float(self.masses[self.dist[center] < radius].sum())

    def masses_at(self, centers: np.ndarray, radius: float) -> np.ndarray:
        return (self.dist[centers] < radius) @ self.masses


def measure_rho(g: FillingGraph, oracle: MeasureOracle) -> WeightAssignment:
    """rho((x,n)) = (mu(B(x, tau a^-n)) / mu(B(z, tau a^(1-n))))**(1/p), z the tree parent.

    The root gets mu(Z)**(1/p). Along the tree the ratios telescope, so
    pi((x,n)) = mu(B(x, tau a^-n))**(1/p); this is checked at every vertex.
    A level counts as saturated when some vertex there has ratio exactly 1.
    """
    alpha, tau, p = g.alpha, g.tau, oracle.p
    ball = np.empty(g.n_vertices)
    same = np.zeros(g.n_vertices, dtype=bool)  # ball holds exactly the parent ball's points
    prev_ids, prev_members = None, None
    for n in range(g.depth + 1):
        ids = g.level_ids(n)
        members = oracle.dist[g.vpoint[ids]] < tau * alpha ** -n
        ball[ids] = members @ oracle.masses
        if prev_ids is not None:
            slot = np.searchsorted(prev_ids, g.parent[ids])
            same[ids] = (members == prev_members[slot]).all(axis=1)
        prev_ids, prev_members = ids, members
    if np.any(ball <= 0):
        i = int(np.flatnonzero(ball <= 0)[0])
        raise ZeroMass(f"ball around vertex {g.vertex(i)} has zero mass")
    rho = np.empty(g.n_vertices)
    rho[0] = oracle.total ** (1 / p)
    # child balls sit inside parent balls, so equal point sets mean a ratio of
    # exactly 1; the dot products can disagree in the last ulp
    ratio = np.where(same[1:], 1.0, ball[1:] / ball[g.parent[1:]])
    rho[1:] = ratio ** (1 / p)
    pi = tree_products(g, rho)
    # B(x0, tau) is all of Z because tau > 1 > diam
    direct = (ball * oracle.total / ball[0]) ** (1 / p)
    err = np.abs(pi - direct) / direct
    if err.max() > TELESCOPE_TOL:
        i = int(err.argmax())
        raise AssertionError(f"telescoping failed at {g.vertex(i)}: pi={pi[i]}, mu^(1/p)={direct[i]}")
    saturated = sorted({int(g.vlevel[i]) for i in np.flatnonzero(ratio == 1.0) + 1})
    return _assignment(g, rho, pi, "measure", saturated, p)


def ball_masses(g: FillingGraph, oracle: MeasureOracle) -> np.ndarray:
    """mu(B(point, tau alpha**-level)) per vertex, computed directly."""
    out = np.empty(g.n_vertices)
    for i in range(g.n_vertices):
        out[i] = oracle.mass(int(g.vpoint[i]), g.tau * g.alpha ** -int(g.vlevel[i]))
    return out


def custom_rho(g: FillingGraph, values: dict) -> WeightAssignment:
    rho = np.empty(g.n_vertices)
    for i in range(g.n_vertices):
        v = g.vertex(i)
        if v not in values and tuple(v) not in values:
            raise MissingVertex(f"no weight for vertex {v}")
        rho[i] = values[v] if v in values else values[tuple(v)]
    if np.any(rho <= 0):
        raise NonPositiveWeight(f"weights must be positive; min is {rho.min()}")
    return _assignment(g, rho, tree_products(g, rho), "custom")


def omega_from_pi(w: WeightAssignment) -> np.ndarray:
    return w.pi.copy()


def rho_from_omega(g: FillingGraph, omega) -> WeightAssignment:
    """rho(v) = omega(v) / omega(parent(v)), rho(root) = omega(root)."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (g.n_vertices,):
        raise MissingVertex(f"expected {g.n_vertices} densities, got {omega.shape}")
    if np.any(omega <= 0):
        raise NonPositiveWeight("densities must be positive")
    rho = np.empty_like(omega)
    rho[0] = omega[0]
    rho[1:] = omega[1:] / omega[g.parent[1:]]
    return _assignment(g, rho, omega.copy(), "custom")


def edge_integral(g: FillingGraph, w: WeightAssignment, u, v) -> float:
    """Integral over the unit edge [u, v] of the linear interpolation of pi."""
    a, b = g.vid(u), g.vid(v)
    if not g.adjacent(a, b):
        raise NotAnEdge(f"{g.vertex(a)} and {g.vertex(b)} are not neighbours")
    return (w.pi[a] + w.pi[b]) / 2


def edge_costs(g: FillingGraph, w: WeightAssignment) -> np.ndarray:
    return (w.pi[g.edges[:, 0]] + w.pi[g.edges[:, 1]]) / 2


def harnack_ratio(g: FillingGraph, omega: np.ndarray) -> float:
    """Largest omega ratio across an edge."""
    a, b = omega[g.edges[:, 0]], omega[g.edges[:, 1]]
    return float(np.maximum(a / b, b / a).max())
