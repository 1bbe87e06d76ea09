"""Deterministic compensated summation for long float arrays."""

import math

import numpy as np

_BLOCK = 64


def compensated_sum(values) -> float:
    """Sum ``values`` in the given order with Neumaier compensation.

    The array is cut into consecutive blocks of ``_BLOCK`` terms.  Every
    block is accumulated left to right with a running compensation term
    (vectorised across blocks), and the block totals plus compensations
    are combined with :func:`math.fsum`.  The result depends only on the
    input order, never on thread count or hardware.
    """
    a = np.ascontiguousarray(values, dtype=np.float64).ravel()
    n = a.size
    if n <= 4 * _BLOCK:
        return math.fsum(a.tolist())
    rows = -(-n // _BLOCK)
    padded = np.zeros(rows * _BLOCK)
    padded[:n] = a
    blocks = np.ascontiguousarray(padded.reshape(rows, _BLOCK).T)
    s = blocks[0].copy()
    c = np.zeros(rows)
    for j in range(1, _BLOCK):
        x = blocks[j]
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return math.fsum(np.concatenate([s, c]).tolist())
