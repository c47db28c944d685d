"""Nystrom discretisation of the Birman-Schwinger operator of a star graph.

The operator acts on densities on the N edges,

    (Q psi)_n(s) = 1/(2 pi) sum_m int_0^L K0(kappa |sigma_n(s) - sigma_m(t)|) psi_m(t) dt,

and the distance only depends on the squared chord ``x`` between the edges'
unit-circle points: ``d^2 = (s - t)^2 + s t x = |t - s e^{i theta}|^2`` with
``x = 4 sin^2(theta / 2)``. Every block of the matrix is therefore a function
of ``x`` alone, and the kernel has a logarithmic singularity at the complex
point ``z0 = s e^{i theta}`` of the t-plane.

Quadrature near that point uses singularity subtraction: with
``K0(z) = -I0(z) ln z + R(z)``,

    K0(kappa d) = -I0(kappa d) ln|t - z0| + (R(kappa d) - I0(kappa d) ln kappa),

both coefficient functions being entire in t. The log factor is integrated
exactly by product-integration weights; everything else by Gauss rules.
Which (target, panel) pairs need this treatment, and how each panel is cut
into pieces, depends only on geometry and on a power-of-two bucket of kappa,
so it is computed once and cached (:class:`BlockPlan`).
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import specfun
from ._backend import USE_NUMBA, njit
from .geometry import StarGraph, chord_sq, distance_sq
from .quadrature import (
    QuadratureRule,
    bernstein_rho,
    gauss_legendre,
    lagrange_matrix,
    log_weights,
)
from .specfun import _cf_scalar, _series_scalar

INV_2PI = 1.0 / (2.0 * math.pi)

PIECE_ORDER = 16  # Gauss order on sub-pieces of near panels
NEAR_TOL = 1e-15  # target accuracy of plain Gauss on a log-singular integrand
RHO_PRODUCT = 1.8  # Legendre-Q recurrence is stable inside this ellipse
Z_CAP = 2.0  # kappa * diameter bound for product pieces (series split accuracy)
MAX_DEPTH = 60


class SingularKernelError(ValueError):
    """Kernel requested at coincident points."""


def _rho_far(order: int) -> float:
    return NEAR_TOL ** (-1.0 / (2 * order))


def kernel_value(g: StarGraph, kappa: float, n: int, s: float, m: int, t: float) -> float:
    """(1/2pi) K0(kappa |sigma_n(s) - sigma_m(t)|)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    d2 = distance_sq(g, n, s, m, t)
    if d2 <= 0.0:
        raise SingularKernelError("kernel is singular at coincident points")
    return INV_2PI * specfun.bessel_k0(kappa * math.sqrt(d2))


class Profile(NamedTuple):
    value: float
    slope: float
    curvature: float


def f_profile(s: float, t: float, kappa: float, x: float) -> Profile:
    """F(x) = K0(kappa sqrt((s-t)^2 + s t x)) with its first two x-derivatives."""
    r2 = (s - t) ** 2 + s * t * x
    if not r2 > 0.0:
        raise SingularKernelError("profile argument vanishes")
    r = math.sqrt(r2)
    z = kappa * r
    k0 = specfun.bessel_k0(z)
    k1 = specfun.bessel_k1(z)
    st = s * t
    slope = -kappa * st * k1 / (2.0 * r)
    dk1 = -k0 - k1 / z
    curvature = kappa * st * st * k1 / (4.0 * r2 * r) - kappa**2 * st * st * dk1 / (4.0 * r2)
    return Profile(k0, slope, curvature)


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class BlockPlan:
    """Geometry-only recipe for one chord value and one kappa bucket."""

    chord: float
    kappa_bucket: float
    far: np.ndarray  # (M, M) bool
    g_target: np.ndarray  # plain-Gauss pieces
    g_col0: np.ndarray
    g_t: np.ndarray
    g_w: np.ndarray
    g_lag: np.ndarray
    p_target: np.ndarray  # product-integration pieces
    p_col0: np.ndarray
    p_t: np.ndarray
    p_w: np.ndarray
    p_logw: np.ndarray
    p_lag: np.ndarray

    @property
    def num_pieces(self) -> int:
        return len(self.g_target) + len(self.p_target)


def _split_pieces(z0, a, b, kb):
    """Breadth-first bisection of the pieces [a, b] seen from z0.

    Returns index/endpoint arrays for Gauss pieces and product pieces.
    """
    rho_q = _rho_far(PIECE_ORDER)
    owner = np.arange(len(a))
    u = np.asarray(a, dtype=float)
    v = np.asarray(b, dtype=float)
    gauss, prod = [], []
    for _ in range(MAX_DEPTH):
        if owner.size == 0:
            break
        c = 0.5 * (u + v)
        h = 0.5 * (v - u)
        zz = z0[owner]
        rho = bernstein_rho((zz - c) / h)
        dmax = np.maximum(np.abs(u - zz), np.abs(v - zz))
        is_gauss = rho >= rho_q
        is_prod = ~is_gauss & (rho <= RHO_PRODUCT) & (kb * dmax <= Z_CAP)
        gauss.append((owner[is_gauss], u[is_gauss], v[is_gauss]))
        prod.append((owner[is_prod], u[is_prod], v[is_prod]))
        rest = ~(is_gauss | is_prod)
        ow, uu, vv, cc = owner[rest], u[rest], v[rest], c[rest]
        owner = np.concatenate([ow, ow])
        u = np.concatenate([uu, cc])
        v = np.concatenate([cc, vv])
    else:
        if owner.size:
            raise RuntimeError("near-field subdivision did not terminate")

    def cat(parts):
        return tuple(np.concatenate([p[i] for p in parts]) if parts else np.empty(0) for i in range(3))

    return cat(gauss), cat(prod)


def build_block_plan(chord: float, rule: QuadratureRule, kappa_bucket: float) -> BlockPlan:
    s = rule.nodes
    p = rule.local_order
    P = rule.num_panels
    bnd = rule.panel_boundaries
    xref, _ = gauss_legendre(p)
    theta = 2.0 * math.asin(min(1.0, math.sqrt(chord) / 2.0))
    z0 = s * complex(math.cos(theta), math.sin(theta))

    pc = 0.5 * (bnd[1:] + bnd[:-1])
    ph = 0.5 * (bnd[1:] - bnd[:-1])
    rho = bernstein_rho((z0[:, None] - pc[None, :]) / ph[None, :])  # (M, P)
    near_pairs = np.argwhere(rho < _rho_far(p))
    tgt = near_pairs[:, 0]
    pan = near_pairs[:, 1]
    far = np.repeat(rho >= _rho_far(p), p, axis=1)

    (go, gu, gv), (po, pu, pv) = _split_pieces(z0[tgt], bnd[pan], bnd[pan + 1], kappa_bucket)
    go = go.astype(int)
    po = po.astype(int)
    xq, wq = gauss_legendre(PIECE_ORDER)

    def piece_nodes(owner, u, v):
        c = 0.5 * (u + v)[:, None]
        h = 0.5 * (v - u)[:, None]
        t = c + h * xq[None, :]
        w = h * wq[None, :]
        k = pan[owner]
        tau = (t - pc[k][:, None]) / ph[k][:, None]
        lag = lagrange_matrix(xref, tau.ravel()).reshape(t.shape + (p,))
        return t, w, lag

    g_t, g_w, g_lag = piece_nodes(go, gu, gv)
    p_t, p_w, p_lag = piece_nodes(po, pu, pv)
    p_logw = np.empty_like(p_t)
    for idx in range(len(po)):  # vectorising over complex z0 needs per-piece maps
        p_logw[idx] = log_weights(pu[idx], pv[idx], z0[tgt[po[idx]]], PIECE_ORDER)
    return BlockPlan(
        chord=chord, kappa_bucket=kappa_bucket, far=far,
        g_target=tgt[go].astype(np.int64), g_col0=(pan[go] * p).astype(np.int64),
        g_t=g_t, g_w=g_w, g_lag=g_lag,
        p_target=tgt[po].astype(np.int64), p_col0=(pan[po] * p).astype(np.int64),
        p_t=p_t, p_w=p_w, p_logw=p_logw, p_lag=p_lag,
    )


class _PlanCache:
    def __init__(self, maxsize: int = 256):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, chord: float, rule: QuadratureRule, kb: float) -> BlockPlan:
        key = (chord, rule_key(rule), kb)
        with self._lock:
            plan = self._data.get(key)
            if plan is not None:
                self._data.move_to_end(key)
                return plan
        plan = build_block_plan(chord, rule, kb)
        with self._lock:
            self._data[key] = plan
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return plan

    def clear(self):
        with self._lock:
            self._data.clear()


PLAN_CACHE = _PlanCache()


def rule_key(rule: QuadratureRule) -> tuple:
    return (rule.length, rule.num_panels, rule.local_order, rule.grading_exponent,
            rule.tip_grading, hash(rule.nodes.tobytes()))


def kappa_bucket(kappa: float) -> float:
    return 2.0 ** math.ceil(math.log2(kappa))


def canonical_chord(x: float) -> float:
    """Round chords so that congruent edge pairs share one block bitwise."""
    return float("%.12e" % x)


# ---------------------------------------------------------------------------
# per-kappa evaluation kernels


@njit
def _k0_scalar(z):
    if z > 700.0:
        return 0.0
    if z <= 2.0:
        return _series_scalar(z)[2]
    return _cf_scalar(z)[0]


@njit
def _block_numba(kappa, chord, s, wts, far, g_target, g_col0, g_t, g_w, g_lag,
                 p_target, p_col0, p_t, p_w, p_logw, p_lag, out):
    M = s.shape[0]
    for i in range(M):
        si = s[i]
        for j in range(M):
            if far[i, j]:
                tj = s[j]
                d = math.sqrt((si - tj) ** 2 + si * tj * chord)
                out[i, j] = wts[j] * _k0_scalar(kappa * d)
            else:
                out[i, j] = 0.0
    p = g_lag.shape[2]
    q = g_t.shape[1]
    for n in range(g_target.shape[0]):
        i = g_target[n]
        si = s[i]
        c0 = g_col0[n]
        for g in range(q):
            t = g_t[n, g]
            d = math.sqrt((si - t) ** 2 + si * t * chord)
            val = g_w[n, g] * _k0_scalar(kappa * d)
            for j in range(p):
                out[i, c0 + j] += val * g_lag[n, g, j]
    lnk = math.log(kappa)
    for n in range(p_target.shape[0]):
        i = p_target[n]
        si = s[i]
        c0 = p_col0[n]
        for g in range(q):
            t = p_t[n, g]
            d = math.sqrt(max((si - t) ** 2 + si * t * chord, 0.0))
            res = _series_scalar(kappa * d)
            i0 = res[0]
            r = res[4]
            val = -p_logw[n, g] * i0 + p_w[n, g] * (r - i0 * lnk)
            for j in range(p):
                out[i, c0 + j] += val * p_lag[n, g, j]


def _block_numpy(kappa, chord, s, wts, plan: BlockPlan, out):
    M = s.shape[0]
    out[...] = 0.0
    ii, jj = np.nonzero(plan.far)
    d = np.sqrt((s[ii] - s[jj]) ** 2 + s[ii] * s[jj] * chord)
    out[ii, jj] = wts[jj] * specfun._k0k1_numpy(kappa * d)[0]
    p = plan.g_lag.shape[2]
    cols = np.arange(p)
    if plan.g_target.size:
        si = s[plan.g_target][:, None]
        t = plan.g_t
        d = np.sqrt((si - t) ** 2 + si * t * chord)
        val = plan.g_w * specfun._k0k1_numpy(kappa * d.ravel())[0].reshape(d.shape)
        contrib = np.einsum("ng,ngj->nj", val, plan.g_lag)
        np.add.at(out, (plan.g_target[:, None], plan.g_col0[:, None] + cols[None, :]), contrib)
    if plan.p_target.size:
        si = s[plan.p_target][:, None]
        t = plan.p_t
        d = np.sqrt(np.maximum((si - t) ** 2 + si * t * chord, 0.0))
        i0, _, _, _, r = specfun._series_numpy(kappa * d.ravel())
        i0 = i0.reshape(d.shape)
        r = r.reshape(d.shape)
        val = -plan.p_logw * i0 + plan.p_w * (r - i0 * math.log(kappa))
        contrib = np.einsum("ng,ngj->nj", val, plan.p_lag)
        np.add.at(out, (plan.p_target[:, None], plan.p_col0[:, None] + cols[None, :]), contrib)
    del M


def nystrom_block(chord: float, kappa: float, rule: QuadratureRule, use_numba: bool | None = None) -> np.ndarray:
    """Unsymmetrised Nystrom block B with (B psi)_i ~ int K0(kappa d(s_i, t)) psi(t) dt."""
    plan = PLAN_CACHE.get(chord, rule, kappa_bucket(kappa))
    return evaluate_plan(plan, kappa, rule, use_numba)


def evaluate_plan(plan: BlockPlan, kappa: float, rule: QuadratureRule, use_numba: bool | None = None) -> np.ndarray:
    M = rule.size
    out = np.empty((M, M))
    if USE_NUMBA if use_numba is None else use_numba:
        _block_numba(float(kappa), float(plan.chord), rule.nodes, rule.weights, plan.far,
                     plan.g_target, plan.g_col0, plan.g_t, plan.g_w, plan.g_lag,
                     plan.p_target, plan.p_col0, plan.p_t, plan.p_w, plan.p_logw, plan.p_lag, out)
    else:
        _block_numpy(float(kappa), float(plan.chord), rule.nodes, rule.weights, plan, out)
    return out


def conjugated_block(chord: float, kappa: float, rule: QuadratureRule) -> np.ndarray:
    """(1/2pi) W^1/2 B W^-1/2: similar to the plain Nystrom block, not symmetric."""
    B = nystrom_block(chord, kappa, rule)
    sw = np.sqrt(rule.weights)
    return (sw[:, None] * B / sw[None, :]) * INV_2PI


def symmetric_block(chord: float, kappa: float, rule: QuadratureRule) -> np.ndarray:
    """(1/2pi) sym(W^1/2 B W^-1/2) for one chord value."""
    C = conjugated_block(chord, kappa, rule)
    return 0.5 * (C + C.T)


# ---------------------------------------------------------------------------
# assembled operator


@dataclass(frozen=True)
class KernelMatrix:
    kappa: float
    graph: StarGraph
    rule: QuadratureRule
    entries: np.ndarray
    chords: np.ndarray  # (N, N) canonical chord per block
    # W^1/2 B W^-1/2 before averaging with its transpose. Same spectrum as plain
    # Nystrom; the averaged ``entries`` carry an O(h^2) bias in the top eigenvalue
    # because the singular correction weights are not symmetric in (s, t).
    nystrom: np.ndarray | None = None

    @property
    def nodes_per_edge(self) -> int:
        return self.rule.size

    def block(self, n: int, m: int) -> np.ndarray:
        M = self.rule.size
        return self.entries[n * M:(n + 1) * M, m * M:(m + 1) * M]

    def symmetry_defect(self) -> float:
        A = self.entries
        return float(np.max(np.abs(A - A.T)) / np.max(np.abs(A)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def sqrt_weights(self) -> np.ndarray:
        return np.tile(np.sqrt(self.rule.weights), self.graph.num_edges)

    def dump(self, path, fmt: str = "npy") -> None:
        """Write the matrix row-major with a small {N, M, kappa} header."""
        header = {"N": self.graph.num_edges, "M": self.rule.size, "kappa": self.kappa}
        if fmt == "txt":
            np.savetxt(path, self.entries, header="N=%(N)d M=%(M)d kappa=%(kappa).17g" % header)
        elif fmt == "npy":
            np.savez(path, entries=self.entries, N=header["N"], M=header["M"], kappa=header["kappa"])
        else:
            raise ValueError("fmt must be 'npy' or 'txt'")


def edge_chords(g: StarGraph) -> np.ndarray:
    N = g.num_edges
    out = np.zeros((N, N))
    for n in range(N):
        for m in range(n + 1, N):
            out[n, m] = out[m, n] = canonical_chord(chord_sq(g, n, m))
    return out


def assemble(g: StarGraph, kappa: float, rule: QuadratureRule) -> KernelMatrix:
    if not (kappa > 0 and math.isfinite(kappa)):
        raise ValueError("kappa must be positive and finite, got %r" % (kappa,))
    if abs(rule.length - g.edge_length) > 1e-12 * g.edge_length:
        raise ValueError("quadrature rule length %g does not match edge length %g" % (rule.length, g.edge_length))
    N = g.num_edges
    M = rule.size
    chords = edge_chords(g)
    blocks = {}
    for x in np.unique(chords):
        blocks[float(x)] = conjugated_block(float(x), kappa, rule)
    C = np.empty((N * M, N * M))
    for n in range(N):
        for m in range(N):
            C[n * M:(n + 1) * M, m * M:(m + 1) * M] = blocks[float(chords[n, m])]
    A = 0.5 * (C + C.T)
    return KernelMatrix(float(kappa), g, rule, A, chords, C)


def shift_permutation(N: int, M: int) -> np.ndarray:
    """Permutation matrix relabelling edge n as edge n + 1."""
    P = np.zeros((N * M, N * M))
    eye = np.eye(M)
    for n in range(N):
        m = (n + 1) % N
        P[m * M:(m + 1) * M, n * M:(n + 1) * M] = eye
    return P
