"""Star graphs with N straight edges of common length L meeting at the origin.

Edges are indexed from 0 and understood cyclically (edge ``n + N`` is edge
``n``). ``angles[n]`` is the clockwise angle from edge ``n`` to edge
``n + 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_FLOOR = 1e-10


class GeometryError(ValueError):
    """Invalid star-graph data."""


@dataclass(frozen=True)
class StarGraph:
    num_edges: int
    edge_length: float
    angles: tuple[float, ...] = field(default=())

    def __post_init__(self):
        n = self.num_edges
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 2:
            raise GeometryError("N must be >= 2, got %r" % (n,))
        L = float(self.edge_length)
        if not (math.isfinite(L) and L > 0.0):
            raise GeometryError("edge length L must be positive and finite, got %r" % (self.edge_length,))
        phi = np.asarray(self.angles, dtype=float)
        if phi.shape != (n,):
            raise GeometryError("expected %d angles, got %d" % (n, phi.size))
        if not np.all(np.isfinite(phi)) or np.any(phi <= 0.0):
            raise GeometryError("angles must be positive and finite")
        phi = phi * (TWO_PI / phi.sum())
        if np.any(phi <= ANGLE_FLOOR) or np.any(phi >= TWO_PI - ANGLE_FLOOR):
            raise GeometryError("every angle must lie in (0, 2*pi) away from the endpoints")
        object.__setattr__(self, "num_edges", int(n))
        object.__setattr__(self, "edge_length", L)
        object.__setattr__(self, "angles", tuple(float(a) for a in phi))

    @property
    def phi(self) -> np.ndarray:
        return np.array(self.angles)

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return float(np.max(np.abs(self.phi - TWO_PI / self.num_edges))) <= tol

    def with_length(self, L: float) -> "StarGraph":
        return StarGraph(self.num_edges, L, self.angles)

    def directions(self) -> np.ndarray:
        """Unit vectors of the edges, shape (N, 2), laid out clockwise."""
        theta = unit_chord_points(self).theta
        return np.column_stack([np.cos(theta), -np.sin(theta)])

    def point(self, n: int, s: float) -> np.ndarray:
        """Planar coordinates of the point at arclength s on edge n."""
        return s * self.directions()[n % self.num_edges]

    def to_record(self, units: str = "rad") -> dict:
        if units == "rad":
            phi = list(self.angles)
        elif units == "frac":
            phi = [a / TWO_PI for a in self.angles]
        else:
            raise GeometryError("units must be 'rad' or 'frac', got %r" % (units,))
        return {"N": self.num_edges, "L": self.edge_length, "phi": phi, "units": units}

    @classmethod
    def from_record(cls, rec: dict) -> "StarGraph":
        for key in ("N", "L", "phi"):
            if key not in rec:
                raise GeometryError("graph record is missing field %r" % key)
        units = rec.get("units", "rad")
        phi = np.asarray(rec["phi"], dtype=float)
        if units == "frac":
            phi = phi * TWO_PI
        elif units != "rad":
            raise GeometryError("units must be 'rad' or 'frac', got %r" % (units,))
        return cls(int(rec["N"]), float(rec["L"]), tuple(phi))

    def dumps(self, units: str = "rad") -> str:
        return json.dumps(self.to_record(units))

    @classmethod
    def loads(cls, text: str) -> "StarGraph":
        return cls.from_record(json.loads(text))


@dataclass(frozen=True)
class UnitChordPoints:
    """Edge endpoints scaled onto the unit circle, as clockwise angles from edge 0."""

    theta: np.ndarray

    def xy(self) -> np.ndarray:
        return np.column_stack([np.cos(self.theta), -np.sin(self.theta)])


def unit_chord_points(g: StarGraph) -> UnitChordPoints:
    theta = np.concatenate([[0.0], np.cumsum(g.phi[:-1])])
    return UnitChordPoints(np.mod(theta, TWO_PI))


def symmetric_graph(N: int, L: float) -> StarGraph:
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise GeometryError("N must be >= 2, got %r" % (N,))
    return StarGraph(int(N), L, (TWO_PI / N,) * int(N))


def graph_from_angles(angles: Sequence[float], L: float, units: str = "rad") -> StarGraph:
    phi = np.asarray(angles, dtype=float)
    if units == "frac":
        phi = phi * TWO_PI
    elif units != "rad":
        raise GeometryError("units must be 'rad' or 'frac', got %r" % (units,))
    return StarGraph(len(phi), L, tuple(phi))


def angle_between(g: StarGraph, n: int, m: int) -> float:
    """Clockwise angle from edge m to edge n, in (0, 2*pi)."""
    N = g.num_edges
    k = (n - m) % N
    if k == 0:
        raise GeometryError("angle between an edge and itself is undefined")
    start = m % N
    return float(sum(g.angles[(start + j) % N] for j in range(k)))


def chord_sq(g: StarGraph, n: int, m: int) -> float:
    """Squared distance between the unit-circle points of edges n and m."""
    N = g.num_edges
    lo, hi = sorted((n % N, m % N))
    if lo == hi:
        return 0.0
    return 4.0 * math.sin(0.5 * angle_between(g, hi, lo)) ** 2


def chord_matrix(g: StarGraph) -> np.ndarray:
    N = g.num_edges
    out = np.zeros((N, N))
    for n in range(N):
        for m in range(n + 1, N):
            out[n, m] = out[m, n] = chord_sq(g, n, m)
    return out


def distance_sq(g: StarGraph, n: int, s: float, m: int, t: float) -> float:
    """|sigma_n(s) - sigma_m(t)|^2 via the law of cosines."""
    L = g.edge_length
    if not (0.0 <= s <= L and 0.0 <= t <= L):
        raise GeometryError("arclength parameters must lie in [0, L]")
    return (s - t) ** 2 + s * t * chord_sq(g, n, m)


def _align_error(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest max-abs difference between a and the rotations/reflections of b."""
    best = math.inf
    for cand in (b, b[::-1]):
        for shift in range(len(b)):
            best = min(best, float(np.max(np.abs(a - np.roll(cand, shift)))))
    return best


def is_congruent(g1: StarGraph, g2: StarGraph, tol: float = 1e-9) -> bool:
    if g1.num_edges != g2.num_edges or g1.edge_length != g2.edge_length:
        raise GeometryError("congruence is only defined for equal N and L")
    return _align_error(g1.phi, g2.phi) <= tol


def distance_to_symmetric(phi: Sequence[float]) -> float:
    """max_n |phi_n - 2 pi / N|; invariant under the congruence group."""
    phi = np.asarray(phi, dtype=float)
    return float(np.max(np.abs(phi - TWO_PI / len(phi))))
