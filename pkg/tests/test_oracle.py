import math

import mpmath
import numpy as np
import pytest

from star_spectra.geometry import StarGraph, symmetric_graph
from star_spectra.oracle import _cross_block, _same_edge_block, cross_validate, galerkin_assemble, galerkin_lambda1
from star_spectra.spectral_solver import lowest_eigenvalue

TWO_PI = 2 * math.pi


def _mp_cell(kappa, chord, s0, t0, h):
    f = lambda s, t: mpmath.besselk(0, kappa * mpmath.sqrt((s - t) ** 2 + s * t * chord))
    return float(mpmath.quad(f, [s0, s0 + h], [t0, t0 + h]))


def test_cross_entry_against_mpmath():
    kappa, chord, L, C = 1.5, 2.0, 1.0, 4
    blk = _cross_block(kappa, chord, L, C)
    assert blk[1, 3] == pytest.approx(_mp_cell(kappa, chord, 0.25, 0.75, 0.25), rel=1e-10)
    # the cell touching the vertex carries the singular point
    assert blk[0, 0] == pytest.approx(_mp_cell(kappa, chord, 0.0, 0.0, 0.25), rel=1e-9)


def test_same_edge_entry_against_mpmath():
    kappa, L, C = 2.0, 1.0, 4
    blk = _same_edge_block(kappa, L, C)
    h = L / C
    f = lambda s, t: mpmath.besselk(0, kappa * abs(s - t))
    ref = float(mpmath.quad(f, [2 * h, 3 * h], [0, h]))
    assert blk[2, 0] == pytest.approx(ref, rel=1e-11)
    diag = float(2 * mpmath.quad(lambda u: (h - u) * mpmath.besselk(0, kappa * u), [0, h]))
    assert blk[1, 1] == pytest.approx(diag, rel=1e-10)


def test_structure_and_nonnegativity():
    G = galerkin_assemble(StarGraph(3, 1.0, (1.0, 2.0, TWO_PI - 3.0)), 1.0, 6).entries
    assert np.array_equal(G, G.T)
    assert np.all(G > 0)
    S = galerkin_assemble(symmetric_graph(4, 1.0), 1.0, 5).entries
    blocks = [[S[5 * n:5 * n + 5, 5 * m:5 * m + 5] for m in range(4)] for n in range(4)]
    for n in range(4):
        for m in range(4):
            assert np.array_equal(blocks[n][m], blocks[(n + 1) % 4][(m + 1) % 4])


def test_single_edge_refinement():
    a = galerkin_assemble(1.0, 1.0, 2).top_eigenvalue()
    b = galerkin_assemble(1.0, 1.0, 4).top_eigenvalue()
    c = galerkin_assemble(1.0, 1.0, 8).top_eigenvalue()
    assert abs(c - b) < abs(b - a)
    with pytest.raises(ValueError):
        galerkin_assemble(1.0, 1.0, 1)


def test_cross_validate_symmetric_three_star():
    cv = cross_validate(symmetric_graph(3, 1.0), 5.0)
    assert not cv.flagged and cv.discrepancy < 1e-5
    assert cv.lambda1_galerkin_raw[0] > cv.lambda1_galerkin_raw[1] > cv.lambda1_galerkin
    assert set(cv.to_record()) >= {"lambda1_nystrom", "lambda1_galerkin", "discrepancy"}


def test_galerkin_scaling_pair():
    g = StarGraph(3, 1.0, (1.0, 2.0, TWO_PI - 3.0))
    a = galerkin_lambda1(g, 5.0, 8)
    b = galerkin_lambda1(g.with_length(2.0), 2.5, 8)
    assert a == pytest.approx(4 * b, rel=1e-9)


def test_galerkin_segment():
    lam = galerkin_lambda1(symmetric_graph(2, 20.0), 2.0, 32)
    assert abs(lam + 1.0) < 0.1
    assert lam == pytest.approx(lowest_eigenvalue(symmetric_graph(2, 20.0), 2.0).lambda1, rel=2e-3)
