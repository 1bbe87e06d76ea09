import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khgauge.cantor import cantor_function, cantor_stage_cover


def test_known_values():
    assert cantor_function(0.0) == 0.0
    assert cantor_function(1.0) == 1.0
    assert cantor_function(0.5) == 0.5
    assert cantor_function(1 / 3) == pytest.approx(0.5, abs=2**-20)
    assert cantor_function(0.25) == pytest.approx(1 / 3, abs=2**-20)
    assert cantor_function(0.75) == pytest.approx(2 / 3, abs=2**-20)


def test_flat_on_removed_thirds():
    x = np.linspace(1 / 3 + 1e-9, 2 / 3 - 1e-9, 50)
    assert np.all(cantor_function(x, 5) == 0.5)


def test_stage_cover():
    lo, hi = cantor_stage_cover(3)
    assert lo.size == 8
    assert np.allclose(hi - lo, 1 / 27)
    assert np.isclose((hi - lo).sum(), (2 / 3) ** 3)
    assert lo[0] == 0.0 and hi[-1] == pytest.approx(1.0)


def test_rise_per_remaining_interval():
    n = 6
    lo, hi = cantor_stage_cover(n)
    rise = cantor_function(hi, n) - cantor_function(lo, n)
    assert np.allclose(rise, 2.0**-n)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_monotone(a, b):
    a, b = min(a, b), max(a, b)
    assert cantor_function(a) <= cantor_function(b)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.integers(1, 12))
def test_stages_within_their_bound(x, n):
    # a stage-n approximation differs from any later one by at most 2^-n
    assert abs(cantor_function(x, n) - cantor_function(x, 30)) <= 2.0**-n + 1e-15
