"""Ground state of the star graph from the Birman-Schwinger condition.

``lambda1 = -kappa*^2`` where ``kappa*`` is the unique root of
``alpha * sup spec Q(kappa) = 1``; ``sup spec Q`` is strictly decreasing in
kappa, so the root is bracketed by halving/doubling and refined with Brent.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .bs_operator import KernelMatrix, assemble
from .geometry import StarGraph
from .quadrature import QuadratureRule, default_rule

EIG_RESIDUAL = 1e-11
MAX_EXPAND = 60
POSITIVITY_TOL = -1e-12


class SpectralError(RuntimeError):
    """Eigen-solver or root-finder failure."""


class NoEigenvalueError(SpectralError):
    pass


class MeshInadequacyError(SpectralError):
    pass


def _top_symmetric(A: np.ndarray) -> tuple[float, np.ndarray]:
    n = A.shape[0]
    w, V = scipy.linalg.eigh(A, subset_by_index=[n - 1, n - 1])
    return float(w[0]), V[:, 0]


def _refine(C: np.ndarray, mu: float, v: np.ndarray, norm: float, max_iter: int) -> tuple[float, np.ndarray, float]:
    """Inverse iteration on a (possibly non-symmetric) matrix with a fixed shift.

    The shift is the symmetric-form estimate, already close, so a handful of
    solves with one LU factorisation converge to working precision.
    """
    n = C.shape[0]
    shift = mu + 1e-10 * max(norm, 1e-300)  # keep C - shift*I safely nonsingular
    lu = scipy.linalg.lu_factor(C - shift * np.eye(n), check_finite=False)
    res = math.inf
    for _ in range(max_iter):
        y = scipy.linalg.lu_solve(lu, v, check_finite=False)
        v = y / np.linalg.norm(y)
        Cv = C @ v
        mu = float(v @ Cv)
        res = float(np.linalg.norm(Cv - mu * v))
        if res <= 0.1 * EIG_RESIDUAL * norm:
            break
    return mu, v, res


def top_eigenpair(matrix, max_iter: int = 30) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and unit eigenvector.

    A plain array is treated as symmetric. For a :class:`KernelMatrix` the
    symmetric form gives a starting pair which is then refined on the
    unsymmetrised Nystrom matrix (see ``KernelMatrix.nystrom``).
    """
    if isinstance(matrix, KernelMatrix):
        A = matrix.entries
        C = matrix.nystrom if matrix.nystrom is not None else A
    else:
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        C = A
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError("expected a non-empty square matrix, got shape %r" % (A.shape,))
    if not np.all(np.isfinite(A)):
        raise SpectralError("matrix has non-finite entries")
    norm = float(np.linalg.norm(C))
    mu, v = _top_symmetric(A)
    if C is not A:
        mu, v, res = _refine(C, mu, v, norm, max_iter)
    else:
        res = float(np.linalg.norm(A @ v - mu * v))
    if not res <= EIG_RESIDUAL * max(norm, 1e-300):
        raise SpectralError(
            "top eigenpair did not converge: residual %.3e > %.1e * ||A|| = %.3e (mu=%.17g, size %d)"
            % (res, EIG_RESIDUAL, EIG_RESIDUAL * norm, mu, A.shape[0])
        )
    if v.sum() < 0:
        v = -v
    return mu, v


def _resolve_rule(g: StarGraph, rule: QuadratureRule | None) -> QuadratureRule:
    return default_rule(g.edge_length) if rule is None else rule


def bs_value(g: StarGraph, alpha: float, kappa: float, rule: QuadratureRule | None = None) -> float:
    """alpha * sup spec Q(kappa), discretised."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    K = assemble(g, kappa, _resolve_rule(g, rule))
    return alpha * top_eigenpair(K)[0]


@dataclass(frozen=True)
class SpectralResult:
    alpha: float
    kappa_star: float
    lambda1: float
    psi_star: np.ndarray = field(repr=False)
    bs_residual: float
    bracket: tuple[float, float]
    mesh: dict
    graph: StarGraph
    nodes: np.ndarray = field(repr=False)  # arclength of every entry of psi_star
    evaluations: int = 0

    def edge_components(self) -> np.ndarray:
        return self.psi_star.reshape(self.graph.num_edges, -1)

    def to_record(self, include_psi: bool = False) -> dict:
        rec = {
            "graph": self.graph.to_record(),
            "alpha": self.alpha,
            "kappa_star": self.kappa_star,
            "lambda1": self.lambda1,
            "bs_residual": self.bs_residual,
            "bracket": list(self.bracket),
            "mesh": dict(self.mesh),
            "evaluations": self.evaluations,
        }
        if include_psi:
            rec["psi_star"] = self.psi_star.tolist()
        return rec

    def write_psi_csv(self, path) -> None:
        M = len(self.nodes) // self.graph.num_edges
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["edge", "s", "value"])
            for k, (s, val) in enumerate(zip(self.nodes, self.psi_star)):
                w.writerow([k // M, repr(float(s)), repr(float(val))])


def _bracket(f, k0: float, factor: float = 2.0) -> tuple[float, float, float, float, int]:
    """Expand from k0 until f changes sign; f(lo) > 0 > f(hi).

    The step starts at ``factor`` and is squared after each probe until it
    reaches 2, after which kappa is halved or doubled.
    """
    f0 = f(k0)
    lo = hi = k0
    flo = fhi = f0
    count = 1
    if f0 > 0:
        while fhi > 0:
            if count > MAX_EXPAND:
                raise NoEigenvalueError("no eigenvalue found: alpha*sup Q stays above 1 up to kappa=%g" % hi)
            lo, flo = hi, fhi
            hi *= factor
            factor = min(2.0, factor * factor)
            fhi = f(hi)
            count += 1
    else:
        while flo <= 0:
            if count > MAX_EXPAND:
                raise NoEigenvalueError(
                    "no eigenvalue found: alpha*sup Q stays below 1 down to kappa=%g "
                    "(discretisation failure?)" % lo
                )
            hi, fhi = lo, flo
            lo /= factor
            factor = min(2.0, factor * factor)
            flo = f(lo)
            count += 1
    return lo, hi, flo, fhi, count


def lowest_eigenvalue(g: StarGraph, alpha: float, rule: QuadratureRule | None = None, *,
                      kappa_guess: float | None = None, xtol: float = 1e-12,
                      residual_tol: float = 1e-10) -> SpectralResult:
    """Solve ``alpha * sup spec Q(kappa) = 1`` and return the ground state."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError("alpha must be positive and finite, got %r" % (alpha,))
    rule = _resolve_rule(g, rule)
    count = 0

    def f(kappa):
        nonlocal count
        count += 1
        return bs_value(g, alpha, kappa, rule) - 1.0

    if kappa_guess and kappa_guess > 0:
        lo, hi, flo, fhi, _ = _bracket(f, kappa_guess, 1.05)
    else:
        lo, hi, flo, fhi, _ = _bracket(f, 0.5 * alpha)
    if lo == hi:
        kstar = lo
    else:
        kstar = brentq(f, lo, hi, xtol=xtol, rtol=xtol, maxiter=200)
    K = assemble(g, kstar, rule)
    mu, v = top_eigenpair(K)
    count += 1
    resid = abs(alpha * mu - 1.0)
    if resid > residual_tol:
        raise SpectralError("Birman-Schwinger residual %.3e exceeds %.1e at kappa=%.17g" % (resid, residual_tol, kstar))
    sw = K.sqrt_weights()
    psi = v / sw
    if np.dot(sw * sw, psi) < 0:
        psi = -psi
    if psi.min() < POSITIVITY_TOL * np.abs(psi).max():
        raise SpectralError("ground state is not positive (min %.3e); mesh too coarse?" % psi.min())
    nodes = np.tile(rule.nodes, g.num_edges)
    return SpectralResult(
        alpha=float(alpha), kappa_star=float(kstar), lambda1=-float(kstar) ** 2, psi_star=psi,
        bs_residual=resid, bracket=(float(lo), float(hi)), mesh=rule.describe(), graph=g,
        nodes=nodes, evaluations=count,
    )


@dataclass(frozen=True)
class EigenfunctionReport:
    min_value: float
    positive: bool
    edge_deviation: float  # max |psi_n(s) - psi_0(s)| / max |psi|
    symmetric_graph: bool

    def to_record(self) -> dict:
        return {
            "min_value": self.min_value, "positive": self.positive,
            "edge_deviation": self.edge_deviation, "symmetric_graph": self.symmetric_graph,
        }


def eigenfunction_report(res: SpectralResult, g: StarGraph) -> EigenfunctionReport:
    comps = res.psi_star.reshape(g.num_edges, -1)
    scale = float(np.abs(comps).max())
    dev = float(np.max(np.abs(comps - comps[0][None, :]))) / scale
    mn = float(comps.min())
    return EigenfunctionReport(mn, mn > 0.0, dev, g.is_symmetric())


# ---------------------------------------------------------------------------
# L -> infinity


def limit_rule(L: float, alpha: float) -> QuadratureRule:
    """Default rule with panels added as alpha*L grows past 10."""
    return default_rule(L, num_panels=8 * max(1, math.ceil(alpha * L / 10.0)))


@dataclass(frozen=True)
class LimitEstimate:
    L_values: tuple[float, ...]
    lambda1: tuple[float, ...]
    threshold: float  # -alpha^2 / 4, bottom of the essential spectrum at L = infinity
    extrapolated: float
    monotone: bool
    straight: bool
    threshold_ok: bool

    @property
    def last(self) -> float:
        return self.lambda1[-1]

    def to_record(self) -> dict:
        return {
            "L": list(self.L_values), "lambda1": list(self.lambda1), "threshold": self.threshold,
            "last": self.last, "extrapolated": self.extrapolated, "monotone": self.monotone,
            "straight": self.straight, "threshold_ok": self.threshold_ok,
        }


def aitken(seq: Sequence[float]) -> float:
    """Delta-squared extrapolation from the last three terms (last term if degenerate)."""
    if len(seq) < 3:
        return float(seq[-1])
    a, b, c = seq[-3:]
    den = (c - b) - (b - a)
    if den == 0.0 or (c - b) * (b - a) <= 0.0:
        return float(c)
    return float(c - (c - b) ** 2 / den)


def infinite_length_estimate(N: int, phi: Sequence[float] | None, alpha: float,
                             L_sequence: Sequence[float] | None = None, *, rule_factory=None,
                             monotone_tol: float = 1e-9) -> LimitEstimate:
    """lambda1 along increasing L with a trend check and an extrapolated limit.

    ``phi=None`` means the symmetric graph. Straight segments approach the
    threshold from above; every other graph has its limit below it.
    """
    if L_sequence is None:
        L_sequence = [c / alpha for c in (5.0, 10.0, 20.0, 40.0)]
    Ls = [float(x) for x in L_sequence]
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("L_sequence must be increasing")
    rule_factory = rule_factory or limit_rule
    phi = tuple(phi) if phi is not None else (2.0 * math.pi / N,) * N
    vals = []
    guess = None
    for L in Ls:
        g = StarGraph(N, L, phi)
        res = lowest_eigenvalue(g, alpha, rule_factory(L, alpha), kappa_guess=guess)
        guess = res.kappa_star
        vals.append(res.lambda1)
    monotone = all(b <= a + monotone_tol * abs(a) for a, b in zip(vals, vals[1:]))
    if not monotone:
        raise MeshInadequacyError("lambda1 not nonincreasing in L: %r" % (vals,))
    g = StarGraph(N, Ls[-1], phi)
    thr = -0.25 * alpha**2
    straight = N == 2 and g.is_symmetric()
    ext = aitken(vals)
    if straight:
        ok = all(v > thr for v in vals)
    else:
        ok = ext < thr
    return LimitEstimate(tuple(Ls), tuple(vals), thr, ext, monotone, straight, ok)
