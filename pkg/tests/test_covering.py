from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khgauge.cells import Cell, nonoverlapping
from khgauge.covering import (
    CenteredInterval,
    besicovitch_decompose,
    families_as_json,
    verify_decomposition,
    vitali_greedy_select,
)
from khgauge.errors import BudgetExceeded


def test_two_disjoint_intervals_one_family():
    fams = besicovitch_decompose([0, 1], [0.4, 0.4])
    assert len(fams) == 1
    assert [(J.lo, J.hi) for J in fams[0]] == [(-0.4, 0.4), (0.6, 1.4)]


def test_single_interval_covers_everything():
    fams = besicovitch_decompose([0, 0.1], [1, 1])
    assert fams == [[CenteredInterval(0.0, 1.0)]]


def test_random_64_points():
    rng = np.random.default_rng(64)
    pts = rng.random(64)
    rad = rng.uniform(0.01, 0.5, 64)
    fams = besicovitch_decompose(pts, rad)
    rep = verify_decomposition(pts, rad, fams)
    assert rep["ok"] and rep["families"] <= 5


def test_touching_intervals_are_not_disjoint():
    a, b = CenteredInterval(0.0, 0.5), CenteredInterval(1.0, 0.5)
    assert not a.disjoint(b)
    fams = besicovitch_decompose([0.0, 1.0, 2.0], [0.5, 0.5, 0.5])
    rep = verify_decomposition([0.0, 1.0, 2.0], [0.5, 0.5, 0.5], fams)
    assert rep["ok"]
    # 1.0 is covered by neither neighbour and touches both, so it needs a
    # family of its own
    assert [[J.center for J in f] for f in fams] == [[0.0, 2.0], [1.0]]


def test_budget_exceeded_when_cap_is_too_small():
    # three pairwise intersecting intervals each holding an uncovered center
    with pytest.raises(BudgetExceeded):
        besicovitch_decompose([0.0, 1.0, 2.0], [0.5, 0.5, 0.5], max_families=0)


def test_bad_input():
    with pytest.raises(ValueError):
        besicovitch_decompose([0.0], [0.0])
    with pytest.raises(ValueError):
        besicovitch_decompose([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        besicovitch_decompose([0.0, np.nan], [1.0, 1.0])


def test_repeated_points_with_same_radius_collapse():
    fams = besicovitch_decompose([0.3, 0.3, 0.9], [0.1, 0.1, 0.1])
    assert sum(len(f) for f in fams) == 2


def test_json_form():
    fams = besicovitch_decompose([0, 1], [0.4, 0.4])
    assert families_as_json(fams) == [[{"center": 0.0, "radius": 0.4}, {"center": 1.0, "radius": 0.4}]]


def test_coverage_is_decided_exactly():
    # the rounded difference equals the radius, the exact one exceeds it
    x, c, r = 8.474337369372327, 0.00013436424411240124, 8.474203005128214
    assert abs(x - c) <= r
    assert abs(Fraction(x) - Fraction(c)) > Fraction(r)
    assert not CenteredInterval(c, r).covers(x)


def test_vitali_examples():
    assert vitali_greedy_select([(0, 1), (0.5, 1.5), (2, 3)]) == [Cell(0, 1), Cell(2, 3)]
    assert vitali_greedy_select([(0, 1), (0.2, 0.8)]) == [Cell(0, 1)]
    cells = [(2, 3), (0, 1), (1, 2)]
    assert vitali_greedy_select(cells) == [Cell(0, 1), Cell(1, 2), Cell(2, 3)]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 512), st.integers(0, 2**32 - 1), st.floats(1e-4, 1.0))
def test_decomposition_properties(n, seed, rmax):
    rng = np.random.default_rng(seed)
    pts = rng.random(n)
    rad = rng.uniform(rmax * 1e-3, rmax, n)
    fams = besicovitch_decompose(pts, rad)
    rep = verify_decomposition(pts, rad, fams)
    assert rep["from_input"] and not rep["uncovered"] and not rep["clashes"]
    assert len(fams) <= 5


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0.01, 5)), min_size=1, max_size=60))
def test_vitali_output_is_non_overlapping(specs):
    cells = [(a, a + w) for a, w in specs]
    kept = vitali_greedy_select(cells)
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert nonoverlapping(kept[i], kept[j])
    # every dropped cell overlaps a kept one at least as long
    for a, b in cells:
        c = Cell(a, b)
        if c not in kept:
            assert any(not nonoverlapping(c, k) and k.length >= c.length for k in kept)


near_ties = st.tuples(st.floats(-1e3, 1e3), st.floats(1e-9, 1e3), st.integers(-3, 3))


@settings(max_examples=500, deadline=None)
@given(near_ties, st.floats(-1e3, 1e3), st.floats(1e-9, 1e3))
def test_fast_comparisons_agree_with_exact_arithmetic(tie, c2, r2):
    c, r, k = tie
    # a point sitting within a few ulps of the interval end
    x = float(np.nextafter(c + r, np.inf if k > 0 else -np.inf)) if k else c + r
    for _ in range(abs(k) - 1):
        x = float(np.nextafter(x, np.inf if k > 0 else -np.inf))
    J, K = CenteredInterval(c, r), CenteredInterval(c2, r2)
    assert J.covers(x) == (abs(Fraction(x) - Fraction(c)) <= Fraction(r))
    assert J.disjoint(K) == (abs(Fraction(c) - Fraction(c2)) > Fraction(r) + Fraction(r2))
    # the touching neighbour of J on the right
    T = CenteredInterval(c + r + r2, r2)
    want = abs(Fraction(c) - Fraction(T.center)) > Fraction(r) + Fraction(r2)
    assert J.disjoint(T) == want
