import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from star_spectra.bs_operator import assemble
from star_spectra.geometry import StarGraph, symmetric_graph
from star_spectra.quadrature import default_rule
from star_spectra.spectral_solver import (
    SpectralError,
    aitken,
    bs_value,
    eigenfunction_report,
    infinite_length_estimate,
    lowest_eigenvalue,
    top_eigenpair,
)

TWO_PI = 2 * math.pi
# mesh-converged solve, confirmed by the Galerkin oracle to 1e-6 (see test_oracle)
BASELINE_SYM3 = -8.03366945


def test_top_eigenpair_scalar():
    mu, v = top_eigenpair(np.array([[3.5]]))
    assert mu == 3.5 and np.array_equal(v, [1.0])


def test_top_eigenpair_shift_and_dense_oracle():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((50, 50))
    A = A + A.T
    mu, v = top_eigenpair(A)
    w, V = np.linalg.eigh(A)
    assert mu == pytest.approx(w[-1], abs=1e-11 * np.abs(w).max())
    assert abs(abs(v @ V[:, -1]) - 1) < 1e-10
    mu2, v2 = top_eigenpair(A + 2.5 * np.eye(50))
    assert mu2 - mu == pytest.approx(2.5, abs=1e-11 * np.abs(w).max())
    assert abs(abs(v2 @ v) - 1) < 1e-10
    with pytest.raises(ValueError):
        top_eigenpair(np.ones((2, 3)))
    with pytest.raises(SpectralError):
        top_eigenpair(np.array([[np.nan]]))


def test_kernel_matrix_eigenpair_residual():
    K = assemble(StarGraph(3, 1.0, (1.0, 2.0, TWO_PI - 3.0)), 2.0, default_rule(1.0))
    mu, v = top_eigenpair(K)
    C = K.nystrom
    assert np.linalg.norm(C @ v - mu * v) <= 1e-11 * np.linalg.norm(C)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert abs(mu - K.eigenvalues()[-1]) < 1e-6  # symmetrised form differs at O(h^2)


def test_bs_value_examples():
    g = symmetric_graph(3, 1.0)
    assert bs_value(g, 10.0, 1.0) == pytest.approx(2 * bs_value(g, 5.0, 1.0), rel=1e-14)
    vals = [bs_value(g, 5.0, k) for k in (0.5, 1.0, 2.0, 4.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # the diagonal self-interaction decays like 1/(2 kappa), not exponentially
    for k in (50.0, 200.0):
        scaled = 2 * k * bs_value(g, 1.0, k)
        assert 1.0 < scaled < 1.2


def test_sym3_regression_and_mesh_stability():
    g = symmetric_graph(3, 1.0)
    a = lowest_eigenvalue(g, 5.0)
    b = lowest_eigenvalue(g, 5.0, default_rule(1.0, 16))
    assert a.lambda1 < 0
    assert a.lambda1 == pytest.approx(b.lambda1, rel=1e-6)
    assert a.lambda1 == pytest.approx(BASELINE_SYM3, rel=1e-6)
    assert a.lambda1 == -a.kappa_star**2
    assert a.bs_residual <= 1e-10
    w = np.tile(default_rule(1.0).weights, 3)
    assert np.sum(w * a.psi_star**2) == pytest.approx(1.0, abs=1e-10)
    assert a.psi_star.min() > 0
    lo, hi = a.bracket
    assert lo <= a.kappa_star <= hi


def test_segment_long_edges_near_threshold():
    res = lowest_eigenvalue(symmetric_graph(2, 20.0), 2.0)
    assert -1.0 < res.lambda1 < 0.0
    assert abs(res.lambda1 + 1.0) < 0.1


def test_monotone_in_length():
    lams = [lowest_eigenvalue(symmetric_graph(3, L), 5.0).lambda1 for L in (1.0, 2.0, 4.0)]
    assert lams[0] > lams[1] > lams[2]


def test_eigenfunction_reports():
    g4 = symmetric_graph(4, 1.0)
    rep = eigenfunction_report(lowest_eigenvalue(g4, 5.0), g4)
    assert rep.edge_deviation <= 1e-8 and rep.positive and rep.symmetric_graph
    ga = StarGraph(3, 1.0, (math.pi / 2, math.pi / 2, math.pi))
    rep = eigenfunction_report(lowest_eigenvalue(ga, 5.0), ga)
    assert rep.edge_deviation > 1e-3 and rep.min_value > 0 and not rep.symmetric_graph


def test_record_and_psi_export(tmp_path):
    g = StarGraph(2, 1.0, (2.0, TWO_PI - 2.0))
    res = lowest_eigenvalue(g, 3.0)
    rec = res.to_record(include_psi=True)
    assert set(rec) >= {"graph", "alpha", "kappa_star", "lambda1", "bs_residual", "mesh", "psi_star"}
    assert "psi_star" not in res.to_record()
    path = tmp_path / "psi.csv"
    res.write_psi_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["edge", "s", "value"]
    assert len(rows) == 1 + res.psi_star.size
    assert float(rows[1][2]) == res.psi_star[0]


def test_warm_start_gives_same_root():
    g = StarGraph(3, 1.0, (1.0, 2.0, TWO_PI - 3.0))
    a = lowest_eigenvalue(g, 5.0)
    b = lowest_eigenvalue(g, 5.0, kappa_guess=0.9 * a.kappa_star)
    assert b.kappa_star == pytest.approx(a.kappa_star, rel=1e-11)


def test_invalid_alpha():
    with pytest.raises(ValueError):
        lowest_eigenvalue(symmetric_graph(3, 1.0), -1.0)


@pytest.mark.parametrize("c", [2.0, 5.0])
def test_scaling_law(c):
    g = StarGraph(3, 1.0, (1.0, 2.0, TWO_PI - 3.0))
    a = lowest_eigenvalue(g, 5.0).lambda1
    b = lowest_eigenvalue(g.with_length(c), 5.0 / c).lambda1
    assert a == pytest.approx(c * c * b, rel=1e-8)


@given(st.floats(0.3, 3.0))
def test_bs_value_strictly_decreasing_grid(k):
    g = StarGraph(3, 1.0, (0.8, 2.1, TWO_PI - 2.9))
    ks = k * 10 ** (np.arange(4) / 20)
    vals = [bs_value(g, 5.0, float(x)) for x in ks]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_aitken():
    seq = [1 + 0.5**k for k in range(3, 8)]
    assert aitken(seq) == pytest.approx(1.0, abs=1e-14)
    assert aitken([1.0, 2.0]) == 2.0
    assert aitken([1.0, 1.0, 1.0]) == 1.0


def test_infinite_length_segment_and_star():
    seg = infinite_length_estimate(2, None, 2.0)
    assert seg.straight and seg.monotone and seg.threshold_ok
    assert all(v > -1.0 for v in seg.lambda1)
    star = infinite_length_estimate(3, None, 2.0)
    assert not star.straight and star.threshold_ok
    assert star.lambda1[-1] < -1.0
    assert all(b <= a for a, b in zip(star.lambda1, star.lambda1[1:]))
    with pytest.raises(ValueError):
        infinite_length_estimate(3, None, 2.0, [2.0, 1.0])


def test_numpy_backend_agrees():
    import os
    import subprocess
    import sys

    code = ("from star_spectra import _backend; from star_spectra.geometry import symmetric_graph;"
            "from star_spectra.spectral_solver import lowest_eigenvalue;"
            "print(_backend.backend_name(), repr(lowest_eigenvalue(symmetric_graph(3, 1.0), 5.0).lambda1))")
    env = dict(os.environ, STAR_SPECTRA_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, timeout=300)
    name, value = out.stdout.split()
    assert name == "numpy"
    ref = lowest_eigenvalue(symmetric_graph(3, 1.0), 5.0).lambda1
    assert float(value) == pytest.approx(ref, rel=1e-12)
