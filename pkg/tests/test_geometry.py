import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from star_spectra.geometry import (
    GeometryError,
    StarGraph,
    angle_between,
    chord_matrix,
    chord_sq,
    distance_sq,
    distance_to_symmetric,
    graph_from_angles,
    is_congruent,
    symmetric_graph,
    unit_chord_points,
)

TWO_PI = 2 * math.pi


@st.composite
def graphs(draw, n_min=2, n_max=8):
    N = draw(st.integers(n_min, n_max))
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=N, max_size=N))
    L = draw(st.floats(0.1, 10.0))
    return StarGraph(N, L, tuple(w))


def test_symmetric_graph_angles():
    g = symmetric_graph(3, 1.0)
    assert np.allclose(g.phi, 2 * math.pi / 3, rtol=0, atol=1e-15)
    seg = symmetric_graph(2, 5.0)
    assert seg.angles == (math.pi, math.pi)
    assert seg.edge_length == 5.0


@pytest.mark.parametrize("N, L", [(1, 1.0), (0, 1.0), (3, 0.0), (3, -1.0), (3, math.inf)])
def test_symmetric_graph_rejects(N, L):
    with pytest.raises(GeometryError):
        symmetric_graph(N, L)


def test_construction_renormalises_and_rejects_degenerate():
    g = StarGraph(3, 1.0, (1.0, 1.0, 2.0))
    assert math.isclose(sum(g.angles), TWO_PI, rel_tol=0, abs_tol=1e-12)
    with pytest.raises(GeometryError):
        StarGraph(3, 1.0, (1.0, 1.0, 0.0))
    with pytest.raises(GeometryError):
        StarGraph(2, 1.0, (1.0, 1e-12))
    with pytest.raises(GeometryError):
        StarGraph(3, 1.0, (1.0, 2.0))


def test_angle_between_examples():
    g = symmetric_graph(4, 1.0)
    assert angle_between(g, 1, 0) == pytest.approx(math.pi / 2, abs=1e-15)
    h = StarGraph(3, 1.0, (math.pi / 2, math.pi / 2, math.pi))
    # 0-based: edge 2 seen from edge 0
    assert angle_between(h, 2, 0) == pytest.approx(math.pi, abs=1e-15)
    for n in range(4):
        with pytest.raises(GeometryError):
            angle_between(g, n + 4, n)


def test_chord_sq_examples():
    g = symmetric_graph(2, 1.0)
    assert chord_sq(g, 0, 1) == pytest.approx(4.0, abs=1e-15)
    g3 = symmetric_graph(3, 1.0)
    assert chord_sq(g3, 0, 1) == pytest.approx(3.0, abs=1e-14)
    assert chord_sq(g3, 2, 2) == 0.0
    assert chord_sq(g3, 1, 4) == 0.0


def test_distance_sq_examples():
    g3 = symmetric_graph(3, 2.0)
    assert distance_sq(g3, 0, 0.5, 0, 1.5) == pytest.approx(1.0)
    assert distance_sq(g3, 0, 1.0, 1, 2.0) == pytest.approx(7.0, abs=1e-13)
    assert 1 + 4 - 2 * 2 * math.cos(2 * math.pi / 3) == pytest.approx(7.0)
    assert distance_sq(g3, 0, 0.0, 2, 0.0) == 0.0
    with pytest.raises(GeometryError):
        distance_sq(g3, 0, -0.1, 1, 0.5)
    with pytest.raises(GeometryError):
        distance_sq(g3, 0, 0.1, 1, 2.5)


def test_congruence_examples():
    a, b, c = 1.0, 2.0, TWO_PI - 3.0
    g = StarGraph(3, 1.0, (a, b, c))
    assert is_congruent(g, StarGraph(3, 1.0, (b, c, a)))
    assert is_congruent(g, StarGraph(3, 1.0, (c, b, a)))
    assert not is_congruent(StarGraph(3, 1.0, (math.pi / 2, math.pi / 2, math.pi)), symmetric_graph(3, 1.0))
    with pytest.raises(GeometryError):
        is_congruent(g, symmetric_graph(4, 1.0))
    with pytest.raises(GeometryError):
        is_congruent(g, StarGraph(3, 2.0, (a, b, c)))


def test_unit_chord_points():
    g = StarGraph(4, 1.0, (0.5, 1.0, 2.0, TWO_PI - 3.5))
    th = unit_chord_points(g).theta
    assert th[0] == 0.0
    assert np.allclose(np.diff(th), g.phi[:-1])
    assert np.all((th >= 0) & (th < TWO_PI))


def test_record_round_trip():
    g = StarGraph(4, 2.5, (0.5, 1.0, 2.0, TWO_PI - 3.5))
    assert StarGraph.loads(g.dumps()) == g
    rec = g.to_record("frac")
    h = StarGraph.from_record(rec)
    assert np.allclose(h.phi, g.phi, atol=1e-15)
    assert graph_from_angles([0.25] * 4, 1.0, units="frac").is_symmetric()
    with pytest.raises(GeometryError):
        StarGraph.from_record({"N": 3, "L": 1.0})


@given(graphs(), st.integers(0, 20), st.integers(0, 20))
def test_chord_symmetric_and_bounded(g, n, m):
    assert chord_sq(g, n, m) == chord_sq(g, m, n)
    assert 0.0 <= chord_sq(g, n, m) <= 4.0 + 1e-15


@given(graphs(), st.integers(0, 7), st.integers(0, 7), st.floats(0, 1), st.floats(0, 1))
def test_distance_properties(g, n, m, u, v):
    s, t = u * g.edge_length, v * g.edge_length
    d2 = distance_sq(g, n, s, m, t)
    assert d2 == pytest.approx(distance_sq(g, m, t, n, s), rel=1e-14, abs=1e-300)
    assert d2 >= (s - t) ** 2 - 1e-15 * (s * s + t * t)
    # law of cosines against planar coordinates
    diff = g.point(n, s) - g.point(m, t)
    assert d2 == pytest.approx(float(diff @ diff), rel=1e-12, abs=1e-12 * g.edge_length**2)


@given(st.integers(2, 12), st.integers(0, 11), st.integers(1, 11))
def test_symmetric_chord_shift_invariant(N, n, m):
    g = symmetric_graph(N, 1.0)
    assert chord_sq(g, n + m, n) == pytest.approx(4 * math.sin(math.pi * m / N) ** 2, abs=1e-13)


@given(graphs())
def test_distance_to_symmetric_is_congruence_invariant(g):
    d = distance_to_symmetric(g.phi)
    assert d == distance_to_symmetric(g.phi[::-1])
    assert d == pytest.approx(distance_to_symmetric(np.roll(g.phi, 1)), abs=0)
    assert chord_matrix(g).shape == (g.num_edges, g.num_edges)
