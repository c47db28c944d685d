"""Search over the angle simplex for the star graph with the largest lambda1."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import TWO_PI, StarGraph, _align_error, distance_to_symmetric, is_congruent, symmetric_graph
from .quadrature import QuadratureRule, default_rule
from .spectral_solver import lowest_eigenvalue

ANGLE_MARGIN = 1e-3
CONGRUENCE_TOL = 1e-9
EQUALITY_TOL = 1e-4


def random_graph(N: int, L: float, seed) -> StarGraph:
    """Angles 2 pi * Dirichlet(1, ..., 1), redrawn until all lie in [1e-3, 2 pi - 1e-3]."""
    if N < 2:
        raise ValueError("N must be >= 2, got %r" % (N,))
    rng = np.random.default_rng(seed)
    while True:
        phi = TWO_PI * rng.dirichlet(np.ones(N))
        if np.all(phi >= ANGLE_MARGIN) and np.all(phi <= TWO_PI - ANGLE_MARGIN):
            return StarGraph(N, L, tuple(phi))


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# random scan


@dataclass(frozen=True)
class ScanRow:
    label: str
    phi: tuple[float, ...]
    lambda1: float
    deviation: float
    gap: float  # lambda1(symmetric) - lambda1
    is_max: bool = False


@dataclass(frozen=True)
class ScanResult:
    N: int
    L: float
    alpha: float
    seed: int
    mesh: dict
    lambda1_symmetric: float
    rows: tuple[ScanRow, ...]
    violations: tuple[ScanRow, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample"] + ["phi%d" % (k + 1) for k in range(self.N)] + ["lambda1", "deviation", "gap", "is_max"])
        for r in self.rows:
            w.writerow([r.label] + ["%.17g" % a for a in r.phi]
                       + ["%.17g" % r.lambda1, "%.17g" % r.deviation, "%.17g" % r.gap, int(r.is_max)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "N": self.N, "L": self.L, "alpha": self.alpha, "seed": self.seed, "mesh": self.mesh,
            "lambda1_symmetric": self.lambda1_symmetric, "samples": len(self.rows) - 1,
            "violations": [r.label for r in self.violations],
            "min_gap": min((r.gap for r in self.rows[1:]), default=None),
        }


def scan(N: int, L: float, alpha: float, num_samples: int, seed: int = 0, rule: QuadratureRule | None = None,
         extra_angles: Sequence[Sequence[float]] = (), workers: int = 1) -> ScanResult:
    """lambda1 for the symmetric graph and ``num_samples`` random graphs on one mesh.

    Sample k is drawn with seed ``[seed, k]``. Any non-congruent sample with
    lambda1 >= lambda1(symmetric) is recorded as a violation.
    """
    if num_samples < 0:
        raise ValueError("num_samples must be >= 0")
    rule = rule or default_rule(L)
    sym = symmetric_graph(N, L)
    base = lowest_eigenvalue(sym, alpha, rule)
    graphs = [("sample%d" % k, random_graph(N, L, [seed, k])) for k in range(num_samples)]
    graphs += [("extra%d" % k, StarGraph(N, L, tuple(phi))) for k, phi in enumerate(extra_angles)]

    def solve(item):
        label, g = item
        return label, g, lowest_eigenvalue(g, alpha, rule, kappa_guess=base.kappa_star).lambda1

    results = _map(solve, graphs, workers)
    rows = [ScanRow("symmetric", sym.angles, base.lambda1, 0.0, 0.0)]
    violations = []
    for label, g, lam in results:
        row = ScanRow(label, g.angles, lam, distance_to_symmetric(g.phi), base.lambda1 - lam)
        rows.append(row)
        if lam >= base.lambda1 and not is_congruent(g, sym, CONGRUENCE_TOL):
            violations.append(row)
    best = max(range(len(rows)), key=lambda i: rows[i].lambda1)
    rows[best] = _mark(rows[best])
    return ScanResult(N, float(L), float(alpha), seed, rule.describe(), base.lambda1, tuple(rows), tuple(violations))


def _mark(row: ScanRow) -> ScanRow:
    return ScanRow(row.label, row.phi, row.lambda1, row.deviation, row.gap, True)


# ---------------------------------------------------------------------------
# Nelder-Mead


@dataclass(frozen=True)
class AnglePoint:
    free_coords: tuple[float, ...]

    @property
    def phi(self) -> tuple[float, ...]:
        return tuple(self.free_coords) + (TWO_PI - sum(self.free_coords),)

    def is_valid(self, margin: float = ANGLE_MARGIN) -> bool:
        p = self.phi
        return all(margin <= a <= TWO_PI - margin for a in p)


def nelder_mead(f, x0: np.ndarray, step: float, xatol: float, max_evals: int):
    """Minimise f; returns (x_best, f_best, evals, converged).

    f may return inf for infeasible points (barrier rejection).
    """
    n = len(x0)
    simplex = [np.array(x0, dtype=float)]
    for k in range(n):
        x = simplex[0].copy()
        x[k] += step
        simplex.append(x)
    vals = [f(x) for x in simplex]
    evals = n + 1
    converged = False
    while evals < max_evals:
        order = np.argsort(vals, kind="stable")
        simplex = [simplex[i] for i in order]
        vals = [vals[i] for i in order]
        diam = max(np.max(np.abs(simplex[i] - simplex[0])) for i in range(1, n + 1))
        if diam < xatol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        evals += 1
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            evals += 1
            if fe < fr:
                simplex[-1], vals[-1] = xe, fe
            else:
                simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
        else:
            xc = centroid + 0.5 * (worst - centroid)
        fc = f(xc)
        evals += 1
        if fc < min(fr, vals[-1]):
            simplex[-1], vals[-1] = xc, fc
            continue
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            vals[i] = f(simplex[i])
            evals += 1
    best = int(np.argmin(vals))
    return simplex[best], vals[best], evals, converged


@dataclass(frozen=True)
class StartResult:
    seed: object
    phi: tuple[float, ...]
    lambda1: float
    distance_to_symmetric: float
    evaluations: int
    converged: bool


@dataclass(frozen=True)
class OptimizationTrace:
    N: int
    L: float
    alpha: float
    iterates: tuple[tuple[tuple[float, ...], float], ...]  # every evaluation (phi, lambda1)
    iterate_start: tuple[int, ...]  # start index of each iterate
    best: tuple[tuple[float, ...], float]
    improvements: tuple[float, ...]  # lambda1 of successive improvements of the best
    evaluations: int
    converged: bool
    distance_to_symmetric: float
    starts: tuple[StartResult, ...] = field(default=())
    mesh: dict = field(default_factory=dict)

    @property
    def equality_case(self) -> bool:
        return self.distance_to_symmetric < EQUALITY_TOL

    def local_maxima(self) -> list[StartResult]:
        """Converged starts that ended away from the symmetric graph."""
        return [s for s in self.starts if s.converged and s.distance_to_symmetric >= EQUALITY_TOL]

    def start_spread(self) -> float:
        """Largest congruence-aligned distance between converged start maximisers."""
        pts = [np.array(s.phi) for s in self.starts if s.converged]
        return max((_align_error(a, b) for a in pts for b in pts), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed"] + ["phi%d" % (k + 1) for k in range(self.N)] + ["lambda1", "is_best"])
        best_idx = max(range(len(self.iterates)), key=lambda i: self.iterates[i][1])
        for i, ((phi, lam), st) in enumerate(zip(self.iterates, self.iterate_start)):
            seed = self.starts[st].seed if self.starts else st
            w.writerow([_seed_str(seed)] + ["%.17g" % a for a in phi] + ["%.17g" % lam, int(i == best_idx)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "N": self.N, "L": self.L, "alpha": self.alpha, "mesh": self.mesh,
            "best_phi": list(self.best[0]), "best_lambda1": self.best[1],
            "evaluations": self.evaluations, "converged": self.converged,
            "distance_to_symmetric": self.distance_to_symmetric, "equality_case": self.equality_case,
            "start_spread": self.start_spread(),
            "starts": [
                {"seed": _seed_str(s.seed), "phi": list(s.phi), "lambda1": s.lambda1,
                 "distance_to_symmetric": s.distance_to_symmetric, "evaluations": s.evaluations,
                 "converged": s.converged}
                for s in self.starts
            ],
            "non_symmetric_local_maxima": len(self.local_maxima()),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _seed_str(seed) -> str:
    return ":".join(str(s) for s in seed) if isinstance(seed, (list, tuple)) else str(seed)


def _run_start(N, L, alpha, rule, phi0, kappa0, step, xatol, max_evals):
    history = []
    cache = {}

    def objective(y):
        pt = AnglePoint(tuple(float(v) for v in y))
        if not pt.is_valid():
            return math.inf
        key = pt.free_coords
        if key not in cache:
            g = StarGraph(N, L, pt.phi)
            lam = lowest_eigenvalue(g, alpha, rule, kappa_guess=kappa0).lambda1
            cache[key] = lam
            history.append((g.angles, lam))
        return -cache[key]

    y0 = np.array(phi0[:-1], dtype=float)
    x, fx, evals, conv = nelder_mead(objective, y0, step, xatol, max_evals)
    phi = AnglePoint(tuple(float(v) for v in x)).phi
    return phi, -fx, len(history), conv, history


def maximize_lambda1(N: int, L: float, alpha: float, rule: QuadratureRule | None = None, *,
                     starts: int = 5, seed: int = 0, initial: Sequence[float] | None = None,
                     step: float = 0.2, xatol: float = 1e-6, max_evals: int = 600,
                     workers: int = 1) -> OptimizationTrace:
    """Nelder-Mead ascent of lambda1 on the N - 1 free angles, from several starts.

    Start 0 is ``initial`` when given; the others are random graphs with seeds
    ``[seed, k]``. Converged when the simplex diameter drops below ``xatol``.
    """
    if N < 2:
        raise ValueError("N must be >= 2, got %r" % (N,))
    rule = rule or default_rule(L)
    kappa0 = lowest_eigenvalue(symmetric_graph(N, L), alpha, rule).kappa_star
    seeds: list = []
    phis = []
    if initial is not None:
        seeds.append("initial")
        phis.append(StarGraph(N, L, tuple(initial)).angles)
    k = 0
    while len(phis) < max(starts, 1):
        seeds.append([seed, k])
        phis.append(random_graph(N, L, [seed, k]).angles)
        k += 1

    runs = _map(lambda p: _run_start(N, L, alpha, rule, p, kappa0, step, xatol, max_evals), phis, workers)
    iterates, owner, improvements, start_res = [], [], [], []
    best = (None, -math.inf)
    for i, (phi, lam, evals, conv, history) in enumerate(runs):
        for rec in history:
            iterates.append(rec)
            owner.append(i)
            if rec[1] > best[1]:
                best = rec
                improvements.append(rec[1])
        start_res.append(StartResult(seeds[i], tuple(phi), lam, distance_to_symmetric(phi), evals, conv))
    return OptimizationTrace(
        N=N, L=float(L), alpha=float(alpha), iterates=tuple(iterates), iterate_start=tuple(owner),
        best=(tuple(best[0]), best[1]), improvements=tuple(improvements),
        evaluations=len(iterates), converged=all(s.converged for s in start_res),
        distance_to_symmetric=distance_to_symmetric(best[0]), starts=tuple(start_res), mesh=rule.describe(),
    )
