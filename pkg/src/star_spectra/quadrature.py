"""Composite Gauss-Legendre rules on [0, L] and logarithmic product integration.

Panels are graded toward the vertex at s = 0 by ``b_j = L (j/P)**g``.
Optionally both ends are graded (``tip_grading``) with the map
``u**g / (u**g + (1 - u)**g)``, which matters because the density also has an
``(L - s) ln(L - s)`` term at the free end of every edge. The solver default
(:func:`default_rule`) uses the two-sided map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


class QuadratureError(ValueError):
    pass


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    panel_boundaries: np.ndarray
    grading_exponent: float
    local_order: int
    tip_grading: bool = False

    @property
    def length(self) -> float:
        return float(self.panel_boundaries[-1])

    @property
    def num_panels(self) -> int:
        return len(self.panel_boundaries) - 1

    @property
    def size(self) -> int:
        return len(self.nodes)

    def panel_slices(self):
        p = self.local_order
        return [slice(k * p, (k + 1) * p) for k in range(self.num_panels)]

    def describe(self) -> dict:
        return {
            "L": self.length,
            "panels": self.num_panels,
            "order": self.local_order,
            "grading": self.grading_exponent,
            "tip_grading": self.tip_grading,
        }

    def scaled(self, c: float) -> "QuadratureRule":
        """The same rule on [0, c L]."""
        return QuadratureRule(
            self.nodes * c, self.weights * c, self.panel_boundaries * c,
            self.grading_exponent, self.local_order, self.tip_grading,
        )

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def panel_boundaries(L: float, num_panels: int, grading_exponent: float, tip_grading: bool = False) -> np.ndarray:
    u = np.arange(num_panels + 1) / num_panels
    if tip_grading:
        # two-sided map u^g / (u^g + (1 - u)^g): end panels shrink like P^-g at both ends
        b = L * u**grading_exponent / (u**grading_exponent + (1.0 - u) ** grading_exponent)
    else:
        b = L * u**grading_exponent
    b[0] = 0.0
    b[-1] = L
    return b


def build_rule(L: float, num_panels: int = 8, local_order: int = 6, grading_exponent: float = 2.0,
               tip_grading: bool = False) -> QuadratureRule:
    if not (math.isfinite(L) and L > 0):
        raise QuadratureError("L must be positive and finite")
    if int(num_panels) != num_panels or num_panels < 1:
        raise QuadratureError("num_panels must be a positive integer")
    if int(local_order) != local_order or local_order < 2:
        raise QuadratureError("local_order must be >= 2")
    if not grading_exponent >= 1.0:
        raise QuadratureError("grading_exponent must be >= 1")
    b = panel_boundaries(float(L), int(num_panels), float(grading_exponent), tip_grading)
    x, w = gauss_legendre(int(local_order))
    mid = 0.5 * (b[1:] + b[:-1])
    half = 0.5 * (b[1:] - b[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadratureRule(nodes, weights, b, float(grading_exponent), int(local_order), bool(tip_grading))


DEFAULT_PANELS = 8
DEFAULT_ORDER = 6
DEFAULT_GRADING = 2.5


def default_rule(L: float, num_panels: int = DEFAULT_PANELS, local_order: int = DEFAULT_ORDER) -> QuadratureRule:
    """Rule used by the solver unless told otherwise: graded at vertex and tip."""
    return build_rule(L, num_panels, local_order, DEFAULT_GRADING, tip_grading=True)


# ---------------------------------------------------------------------------
# logarithmic moments


RHO_FORWARD = 1.8


def _legendre_q(zeta: np.ndarray, nmax: int) -> np.ndarray:
    """Legendre functions of the second kind Q_0..Q_nmax at complex zeta.

    Uses ``2 Q_k(z) = int_{-1}^{1} P_k(t) / (z - t) dt`` with the principal
    logarithm. Forward recurrence near [-1, 1]; farther out Q_k decays like
    rho^-k and the forward recurrence is unstable, so Miller's backward
    recurrence normalised by Q_0 is used instead.
    """
    zeta = np.asarray(zeta, dtype=complex)
    q = np.empty(zeta.shape + (nmax + 1,), dtype=complex)
    rho = bernstein_rho(zeta)
    near = rho <= RHO_FORWARD
    zn = zeta[near]
    qn = np.empty(zn.shape + (nmax + 1,), dtype=complex)
    qn[..., 0] = 0.5 * (np.log(zn + 1.0) - np.log(zn - 1.0))
    if nmax >= 1:
        qn[..., 1] = zn * qn[..., 0] - 1.0
    for k in range(1, nmax):
        qn[..., k + 1] = ((2 * k + 1) * zn * qn[..., k] - k * qn[..., k - 1]) / (k + 1)
    q[near] = qn
    if np.any(~near):
        zf = zeta[~near]
        start = nmax + 5 + int(math.ceil(40.0 / math.log(RHO_FORWARD)))
        upper = np.zeros(zf.shape, dtype=complex)
        cur = np.full(zf.shape, 1e-300, dtype=complex)
        qf = np.empty(zf.shape + (nmax + 1,), dtype=complex)
        for k in range(start, 0, -1):
            # Q_{k-1} = ((2k+1) z Q_k - (k+1) Q_{k+1}) / k
            lower = ((2 * k + 1) * zf * cur - (k + 1) * upper) / k
            upper, cur = cur, lower
            big = np.abs(cur) > 1e250
            if np.any(big):
                upper = np.where(big, upper * 1e-250, upper)
                qf = np.where(big[..., None], qf * 1e-250, qf)
                cur = np.where(big, cur * 1e-250, cur)
            if k - 1 <= nmax:
                qf[..., k - 1] = cur
        q0 = np.arctanh(1.0 / zf)
        q[~near] = qf * (q0 / qf[..., 0])[..., None]
    return q


def reference_log_moments(zeta, n: int) -> np.ndarray:
    """``int_{-1}^{1} P_k(tau) ln|tau - zeta| dtau`` for k < n.

    zeta may be complex (a point off the interval) and is broadcast; the
    result has shape ``zeta.shape + (n,)``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    zeta = np.where(zeta.imag < 0, zeta.conj(), zeta)
    out = np.empty(zeta.shape + (n,))
    a = 1.0 - zeta
    b = 1.0 + zeta
    # int ln|tau - zeta| = Re[(1 - z) Log(1 - z) + (1 + z) Log(-1 - z)] - 2
    m0 = np.real(_clog_mul(a, a) + _clog_mul(b, -b)) - 2.0
    out[..., 0] = m0
    if n == 1:
        return out
    end = (zeta.imag == 0) & (np.abs(np.abs(zeta.real) - 1.0) == 0.0)
    safe = np.where(end, 0.5j, zeta)
    q = _legendre_q(safe, n)
    k = np.arange(1, n)
    out[..., 1:] = 2.0 * np.real(q[..., 2:n + 1] - q[..., 0:n - 1]) / (2 * k + 1)
    if np.any(end):
        # closed forms at tau = +-1: int P_k ln|1 -+ tau| = -2 / (k (k + 1)) (times (-1)^k for -1)
        sgn = np.sign(zeta.real[end])
        base = -2.0 / (k * (k + 1.0))
        out[end, 1:] = np.where(sgn[:, None] > 0, base[None, :], base[None, :] * (-1.0) ** k[None, :])
    return out


def _clog_mul(w, v):
    """w * Log(v) with 0 * Log(0) = 0."""
    small = np.abs(v) == 0.0
    vv = np.where(small, 1.0, v)
    return np.where(small, 0.0, w * np.log(vv))


def log_moments(a: float, b: float, z0, n: int) -> np.ndarray:
    """``int_a^b P_k(tau(t)) ln|t - z0| dt`` for k < n, tau mapping [a, b] onto [-1, 1]."""
    if not b > a:
        raise QuadratureError("degenerate panel [%r, %r]" % (a, b))
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    zeta = (np.asarray(z0, dtype=complex) - c) / h
    m = reference_log_moments(zeta, n)
    m[..., 0] += 2.0 * math.log(h)
    return h * m


def log_moment(panel: tuple[float, float], node_point, poly_degree: int) -> float:
    """``int_panel p_k(t) ln|node_point - t| dt`` for the panel-mapped Legendre p_k."""
    if poly_degree < 0:
        raise QuadratureError("poly_degree must be >= 0")
    a, b = panel
    return float(log_moments(a, b, node_point, poly_degree + 1)[..., poly_degree])


@lru_cache(maxsize=64)
def _legendre_at_nodes(n: int) -> np.ndarray:
    """(2k+1)/2 * w_g * P_k(x_g), shape (n, n): maps moments to nodal weights."""
    x, w = gauss_legendre(n)
    V = legendre.legvander(x, n - 1)  # V[g, k] = P_k(x_g)
    out = V * w[:, None] * (2 * np.arange(n) + 1)[None, :] / 2.0
    out.setflags(write=False)
    return out


def log_weights(a: float, b: float, z0, n: int) -> np.ndarray:
    """Product-integration weights: ``sum_g W_g f(t_g) ~ int_a^b f(t) ln|t - z0| dt``.

    Exact for polynomials f of degree < n; t_g are the n-point Gauss nodes
    of [a, b].
    """
    m = log_moments(a, b, z0, n)
    return m @ _legendre_at_nodes(n).T


def lagrange_matrix(xnodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L[i, j] = l_j(x_i) for the Lagrange basis on ``xnodes`` (barycentric form)."""
    xnodes = np.asarray(xnodes, dtype=float)
    x = np.asarray(x, dtype=float)
    diff = xnodes[:, None] - xnodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    d = x[:, None] - xnodes[None, :]
    exact = d == 0.0
    d = np.where(exact, 1.0, d)
    terms = bw[None, :] / d
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        out[rows] = exact[rows].astype(float)
    return out


def bernstein_rho(zeta) -> np.ndarray:
    """Parameter of the Bernstein ellipse through zeta (foci +-1)."""
    zeta = np.asarray(zeta, dtype=complex)
    r = zeta + np.sqrt(zeta - 1.0) * np.sqrt(zeta + 1.0)
    return np.maximum(np.abs(r), 1.0 / np.maximum(np.abs(r), 1e-300))
