"""Chord-sum inequality for N points on the unit circle.

The candidate bound for shift m is ``sum_n |y_{n+m} - y_n|^2 <= 4 N sin^2(pi m / N)``,
with equality at equally spaced points. Jensen's inequality would give it if
``sin^2(theta / 2)`` were concave on every arc, but that function is concave
only for theta in ``[pi / 2, 3 pi / 2]``. The bound holds for N <= 3 and
fails on open sets of configurations once N >= 4, so slacks are reported
as computed and may be negative.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, StarGraph, distance_to_symmetric

SLACK_TOL = 1e-12
STRICT_DEVIATION = 1e-6


def _check_m(N: int, m: int) -> None:
    if not (1 <= m <= N - 1):
        raise ValueError("m must lie in 1..N-1 = 1..%d, got %r" % (N - 1, m))


def _span_angles(phi: np.ndarray, m: int) -> np.ndarray:
    """theta_n = phi_n + ... + phi_{n+m-1} (cyclic), the arc from y_n to y_{n+m}."""
    c = np.cumsum(np.concatenate([phi, phi]))
    c = np.concatenate([[0.0], c])
    N = len(phi)
    return c[np.arange(N) + m] - c[np.arange(N)]


def chord_sum(g: StarGraph, m: int) -> float:
    """sum_n chord_sq(g, n + m, n). m = N gives 0 (full turn)."""
    N = g.num_edges
    if m % N == 0 and m > 0:
        return 0.0
    _check_m(N, m)
    return float(np.sum(4.0 * np.sin(0.5 * _span_angles(g.phi, m)) ** 2))


def jensen_bound(N: int, m: int) -> float:
    _check_m(N, m)
    return 4.0 * N * math.sin(math.pi * m / N) ** 2


@dataclass(frozen=True)
class ChordReport:
    m: tuple[int, ...]
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]
    slack: tuple[float, ...]
    all_nonneg: bool
    strict_at_1: bool
    deviation: float

    def rows(self):
        return list(zip(self.m, self.lhs, self.rhs, self.slack))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "lhs", "rhs", "slack"])
        for m, a, b, s in self.rows():
            w.writerow([m, "%.17g" % a, "%.17g" % b, "%.17g" % s])
        return buf.getvalue()


def verify_inequality(g: StarGraph) -> ChordReport:
    N = g.num_edges
    ms = tuple(range(1, N))
    lhs = tuple(chord_sum(g, m) for m in ms)
    rhs = tuple(jensen_bound(N, m) for m in ms)
    slack = tuple(b - a for a, b in zip(lhs, rhs))
    return ChordReport(
        m=ms, lhs=lhs, rhs=rhs, slack=slack,
        all_nonneg=all(s >= -SLACK_TOL for s in slack),
        strict_at_1=slack[0] > SLACK_TOL,
        deviation=distance_to_symmetric(g.phi),
    )


def batch_slacks(phi: np.ndarray) -> np.ndarray:
    """Slacks for a batch of angle vectors, shape (K, N) -> (K, N-1)."""
    phi = np.asarray(phi, dtype=float)
    K, N = phi.shape
    c = np.concatenate([np.zeros((K, 1)), np.cumsum(np.concatenate([phi, phi], axis=1), axis=1)], axis=1)
    out = np.empty((K, N - 1))
    idx = np.arange(N)
    for m in range(1, N):
        theta = c[:, idx + m] - c[:, idx]
        out[:, m - 1] = 4.0 * N * math.sin(math.pi * m / N) ** 2 - np.sum(4.0 * np.sin(0.5 * theta) ** 2, axis=1)
    return out


def jensen_gap(theta) -> float:
    """N sin^2(mean(theta)/2) - sum sin^2(theta_n/2).

    Nonnegative when every theta_n lies in the concave range [pi/2, 3 pi/2].
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > TWO_PI):
        raise ValueError("theta must lie in [0, 2 pi]")
    return float(len(theta) * math.sin(0.5 * theta.mean()) ** 2 - np.sum(np.sin(0.5 * theta) ** 2))
