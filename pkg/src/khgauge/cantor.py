"""Stage-n approximations of the Cantor function.

``cantor_function(x, n)`` is the continuous piecewise-linear function that
is flat on the middle thirds removed in the first ``n`` construction steps
and linear on each of the ``2**n`` remaining intervals.  It agrees with the
Cantor function at every endpoint of those intervals and differs from it by
at most ``2**-n`` elsewhere (each remaining interval carries a rise of
``2**-n``).
"""

from __future__ import annotations

import numpy as np

DEFAULT_STAGE = 20


def cantor_function(x, stage: int = DEFAULT_STAGE):
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    t = np.clip(np.atleast_1d(x).copy(), 0.0, 1.0)
    value = np.zeros(t.shape)
    done = np.zeros(t.shape, dtype=bool)
    half = 0.5
    for _ in range(int(stage)):
        t3 = 3.0 * t
        digit = np.minimum(np.floor(t3), 2.0)
        middle = (digit == 1.0) & ~done
        value = np.where(middle, value + half, value)
        done |= middle
        value = np.where(~done & (digit == 2.0), value + half, value)
        t = t3 - digit
        half *= 0.5
    value = np.where(done, value, value + 2.0 * half * t)
    return float(value[0]) if scalar else value


def cantor_stage_cover(stage: int):
    """Left and right ends of the ``2**stage`` intervals left after ``stage`` steps."""
    lo = np.array([0.0])
    width = 1.0
    for _ in range(int(stage)):
        width /= 3.0
        lo = np.concatenate([lo, lo + 2.0 * width])
    lo.sort()
    return lo, lo + width
