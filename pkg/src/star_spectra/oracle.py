"""Piecewise-constant Galerkin discretisation, used only to cross-check Nystrom.

Nothing here touches the log-split or the product-integration code: kernel
values come from :func:`scipy.special.k0`; same-edge cell pairs are reduced
exactly to one-dimensional integrals ``int (h - |u|) K0(kappa |u + k h|) du``
handed to QUADPACK, and cross-edge pairs are integrated by adaptive
quadtree subdivision with tensor Gauss rules.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import integrate, special
from scipy.optimize import brentq

from .geometry import StarGraph, chord_sq

GAUSS_2D = 8
RTOL = 1e-10
MAX_LEVEL = 48
MAX_SQUARES = 20_000_000
DISCREPANCY_FLAG = 1e-4


class OracleBudgetError(RuntimeError):
    pass


_xg, _wg = np.polynomial.legendre.leggauss(GAUSS_2D)
_X = 0.5 * (1.0 + np.add.outer(_xg * 0.0, _xg)).ravel()  # t offsets in [0, 1]
_Y = 0.5 * (1.0 + np.add.outer(_xg, _xg * 0.0)).ravel()  # s offsets
_W = 0.25 * np.outer(_wg, _wg).ravel()


def _square_rule(s0, t0, h, kappa, chord):
    """Tensor Gauss estimate on squares [s0, s0+h] x [t0, t0+h] (arrays)."""
    s = s0[:, None] + h[:, None] * _Y[None, :]
    t = t0[:, None] + h[:, None] * _X[None, :]
    d = np.sqrt((s - t) ** 2 + s * t * chord)
    return (h * h) * (special.k0(kappa * d) @ _W)


def _cross_block(kappa, chord, L, C):
    """(C, C) matrix of cell integrals for two distinct edges with this chord."""
    h = L / C
    ii, jj = np.triu_indices(C)
    owner = np.arange(ii.size)
    s0 = ii * h
    t0 = jj * h
    size = np.full(ii.size, h)
    est = _square_rule(s0, t0, size, kappa, chord)
    tol = RTOL * np.abs(est)
    total = np.zeros(ii.size)
    level = 0
    seen = ii.size
    while owner.size:
        if level > MAX_LEVEL or seen > MAX_SQUARES:
            raise OracleBudgetError("adaptive cell integration exceeded its budget (chord %.3g, kappa %.3g)" % (chord, kappa))
        half = 0.5 * size
        cs = np.concatenate([s0, s0 + half, s0, s0 + half])
        ct = np.concatenate([t0, t0, t0 + half, t0 + half])
        ch = np.concatenate([half] * 4)
        kids = _square_rule(cs, ct, ch, kappa, chord).reshape(4, -1)
        fine = kids.sum(axis=0)
        ok = np.abs(fine - est) <= tol[owner] * 0.5 ** level
        np.add.at(total, owner[ok], fine[ok])
        bad = ~ok
        n_bad = int(bad.sum())
        owner = np.tile(owner[bad], 4)
        s0 = cs.reshape(4, -1)[:, bad].ravel()
        t0 = ct.reshape(4, -1)[:, bad].ravel()
        size = np.tile(half[bad], 4)
        est = kids[:, bad].ravel()
        seen += 4 * n_bad
        level += 1
    out = np.zeros((C, C))
    out[ii, jj] = total
    out[jj, ii] = total
    return out


def _same_edge_block(kappa, L, C):
    """Toeplitz block: cell pair (i, j) depends only on k = |i - j|."""
    h = L / C

    def f(u, k):
        return (h - abs(u)) * special.k0(kappa * abs(u + k * h))

    col = np.empty(C)
    for k in range(C):
        if k <= 1:
            # integrable log singularity where u + k h = 0
            pts = [-k * h] if k == 1 else [0.0]
            a = integrate.quad(f, -h, pts[0], args=(k,), epsabs=0.0, epsrel=1e-13, limit=200)[0] if k == 0 else 0.0
            b = integrate.quad(f, pts[0], h, args=(k,), epsabs=0.0, epsrel=1e-13, limit=200)[0]
            col[k] = a + b
        else:
            col[k] = integrate.quad(f, -h, h, args=(k,), epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return scipy.linalg.toeplitz(col)


@dataclass(frozen=True)
class GalerkinMatrix:
    kappa: float
    graph: StarGraph | None
    num_cells: int
    entries: np.ndarray

    def top_eigenvalue(self) -> float:
        n = self.entries.shape[0]
        return float(scipy.linalg.eigh(self.entries, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])

    def eigenvalues(self) -> np.ndarray:
        return scipy.linalg.eigvalsh(self.entries)


def _assemble_chords(chords: np.ndarray, L: float, kappa: float, C: int) -> np.ndarray:
    N = chords.shape[0]
    h = L / C
    cache = {}
    A = np.empty((N * C, N * C))
    for n in range(N):
        for m in range(N):
            x = float("%.12e" % chords[n, m])  # congruent pairs share one block
            if x not in cache:
                cache[x] = _same_edge_block(kappa, L, C) if n == m else _cross_block(kappa, x, L, C)
            A[n * C:(n + 1) * C, m * C:(m + 1) * C] = cache[x]
    return A / (2.0 * math.pi * h)


def galerkin_assemble(g: StarGraph | float, kappa: float, C: int) -> GalerkinMatrix:
    """Galerkin matrix on C uniform cells per edge.

    Passing a plain length instead of a graph gives the single-edge operator.
    """
    if int(C) != C or C < 2:
        raise ValueError("C must be an integer >= 2")
    if not (kappa > 0 and math.isfinite(kappa)):
        raise ValueError("kappa must be positive and finite")
    if isinstance(g, StarGraph):
        N = g.num_edges
        chords = np.array([[chord_sq(g, n, m) if n != m else 0.0 for m in range(N)] for n in range(N)])
        L = g.edge_length
        graph = g
    else:
        chords = np.zeros((1, 1))
        L = float(g)
        graph = None
    return GalerkinMatrix(float(kappa), graph, int(C), _assemble_chords(chords, L, float(kappa), int(C)))


def galerkin_lambda1(g: StarGraph, alpha: float, C: int, kappa_guess: float | None = None,
                     xtol: float = 1e-12) -> float:
    """lambda1 from ``alpha * top eig(G(kappa)) = 1`` with the Galerkin matrix."""

    def f(k):
        return alpha * galerkin_assemble(g, k, C).top_eigenvalue() - 1.0

    k = kappa_guess if kappa_guess else 0.5 * alpha
    lo, hi = k * 0.97, k * 1.03
    flo, fhi = f(lo), f(hi)
    for _ in range(60):
        if flo > 0:
            break
        hi, fhi = lo, flo
        lo *= 0.5
        flo = f(lo)
    for _ in range(60):
        if fhi < 0:
            break
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = f(hi)
    if not (flo > 0 > fhi):
        raise RuntimeError("could not bracket the Galerkin root")
    kstar = brentq(f, lo, hi, xtol=xtol, rtol=xtol)
    return -kstar**2


@dataclass(frozen=True)
class CrossValidation:
    lambda1_nystrom: float
    lambda1_galerkin: float  # extrapolated in C
    lambda1_galerkin_raw: tuple[float, float]  # at C and 2C
    cells: int
    discrepancy: float
    flagged: bool

    def to_record(self) -> dict:
        return {
            "lambda1_nystrom": self.lambda1_nystrom,
            "lambda1_galerkin": self.lambda1_galerkin,
            "lambda1_galerkin_raw": list(self.lambda1_galerkin_raw),
            "cells": self.cells,
            "discrepancy": self.discrepancy,
            "flagged": self.flagged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


def cross_validate(g: StarGraph, alpha: float, nystrom_rule=None, C: int = 32) -> CrossValidation:
    """Compare lambda1 from the Nystrom solver and from Galerkin at C and 2C cells.

    The piecewise-constant error is O(h^2), so the two Galerkin values are
    combined by Richardson extrapolation before comparing.
    """
    from .spectral_solver import lowest_eigenvalue

    ny = lowest_eigenvalue(g, alpha, nystrom_rule)
    l1 = galerkin_lambda1(g, alpha, C, ny.kappa_star)
    l2 = galerkin_lambda1(g, alpha, 2 * C, ny.kappa_star)
    ext = (4.0 * l2 - l1) / 3.0
    disc = abs(ny.lambda1 - ext) / abs(ny.lambda1)
    return CrossValidation(ny.lambda1, ext, (l1, l2), int(C), disc, disc > DISCREPANCY_FLAG)
