import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from khgauge.summation import compensated_sum


def test_small_and_empty():
    assert compensated_sum([]) == 0.0
    assert compensated_sum([1.0, 1e100, 1.0, -1e100]) == 2.0


def test_cancellation_in_long_array():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(100_000) * 10.0 ** rng.integers(-8, 8, 100_000)
    x = np.concatenate([x, -x])
    rng.shuffle(x)
    assert abs(compensated_sum(x)) <= 1e-12 * np.abs(x).max()


def test_matches_fsum_on_harmonic_terms():
    x = 1.0 / np.arange(1, 300_001)
    assert compensated_sum(x) == math.fsum(x.tolist())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=0, max_size=2000))
def test_close_to_exact_sum(xs):
    exact = math.fsum(xs)
    scale = math.fsum(abs(v) for v in xs)
    eps = np.finfo(float).eps
    # Neumaier bound: a couple of ulps of the result plus n eps^2 of the scale
    assert abs(compensated_sum(xs) - exact) <= 4 * eps * abs(exact) + len(xs) * eps**2 * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_deterministic_for_fixed_order(seed):
    x = np.random.default_rng(seed).standard_normal(5000)
    assert compensated_sum(x) == compensated_sum(x.copy())
