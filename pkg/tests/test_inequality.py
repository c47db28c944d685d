import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from star_spectra.geometry import StarGraph, symmetric_graph
from star_spectra.inequality import batch_slacks, chord_sum, jensen_bound, jensen_gap, verify_inequality
from star_spectra.optimizer import random_graph

TWO_PI = 2 * math.pi


def test_symmetric_four_star():
    g = symmetric_graph(4, 1.0)
    assert chord_sum(g, 1) == pytest.approx(8.0, abs=1e-12)
    assert jensen_bound(4, 1) == pytest.approx(8.0, abs=1e-12)


def test_right_angle_star():
    g = StarGraph(3, 1.0, (math.pi / 2, math.pi / 2, math.pi))
    assert chord_sum(g, 1) == pytest.approx(8.0, abs=1e-12)
    rep = verify_inequality(g)
    assert rep.slack[0] == pytest.approx(1.0, abs=1e-12)
    assert rep.strict_at_1 and rep.all_nonneg


def test_full_turn_and_bounds():
    g = symmetric_graph(5, 1.0)
    assert chord_sum(g, 5) == 0.0
    assert jensen_bound(3, 1) == pytest.approx(9.0)
    assert jensen_bound(4, 2) == pytest.approx(16.0)
    assert jensen_bound(2, 1) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        chord_sum(g, 0)
    with pytest.raises(ValueError):
        jensen_bound(4, 4)


def test_symmetric_slacks_vanish():
    rep = verify_inequality(symmetric_graph(7, 1.0))
    assert max(abs(s) for s in rep.slack) <= 1e-12
    assert rep.all_nonneg and not rep.strict_at_1


@pytest.mark.parametrize("N", [2, 3])
def test_small_N_random(N):
    for k in range(200):
        rep = verify_inequality(random_graph(N, 1.0, [7, k]))
        assert rep.all_nonneg
        assert rep.strict_at_1 == (rep.deviation > 1e-6)


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
def test_three_star_property(w):
    phi = np.asarray(w) / sum(w) * TWO_PI
    phi[-1] = TWO_PI - phi[:-1].sum()
    assert batch_slacks(phi[None, :]).min() >= -1e-12


def test_counterexample_for_four_edges():
    # three equal arcs and a zero-width fourth beat the square at m = 1
    phi = np.array([TWO_PI / 3] * 3 + [0.0])
    lhs = 3 * 4 * math.sin(math.pi / 3) ** 2
    assert lhs == pytest.approx(9.0)
    assert batch_slacks(phi[None, :])[0, 0] == pytest.approx(-1.0)
    g = StarGraph(5, 1.0, (0.9, 1.1, 1.3, 1.5, TWO_PI - 4.8))
    rep = verify_inequality(g)
    assert rep.slack[0] < 0 and rep.slack[3] < 0
    assert not rep.all_nonneg


def test_batch_matches_scalar():
    for k in range(20):
        g = random_graph(6, 1.0, [3, k])
        rep = verify_inequality(g)
        assert np.allclose(batch_slacks(g.phi[None, :])[0], rep.slack, atol=1e-13)


@given(st.integers(0, 5), st.booleans())
def test_rotation_and_reversal_invariance(shift, flip):
    g = random_graph(6, 1.0, [11, shift])
    phi = np.roll(g.phi, shift)
    if flip:
        phi = phi[::-1]
    assert np.allclose(batch_slacks(phi[None, :]), batch_slacks(g.phi[None, :]), atol=1e-12)


@given(st.lists(st.floats(math.pi / 2, 3 * math.pi / 2), min_size=2, max_size=8))
def test_jensen_in_concave_range(theta):
    assert jensen_gap(theta) >= -1e-12


def test_jensen_fails_outside_concave_range():
    assert jensen_gap([0.0, 0.0, 2.0]) < 0
    with pytest.raises(ValueError):
        jensen_gap([-0.1, 1.0])


def test_csv_export():
    text = verify_inequality(symmetric_graph(4, 1.0)).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "m,lhs,rhs,slack" and len(lines) == 4
