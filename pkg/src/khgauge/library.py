"""Named integrands used by the checks, the CLI and the test suite."""

from __future__ import annotations

import numpy as np

from .integrate import Integrand

FLAGSHIP_TEXT = "2*x*sin(1/x^2) - (2/x)*cos(1/x^2)"


def _flagship(x):
    u = 1.0 / (x * x)
    return 2.0 * x * np.sin(u) - (2.0 / x) * np.cos(u)


def one(cell=(0.0, 1.0)) -> Integrand:
    return Integrand(lambda x: np.ones_like(x), cell, label="1")


def ident(cell=(0.0, 1.0)) -> Integrand:
    return Integrand(lambda x: x, cell, label="y")


def sin2pi(cell=(0.0, 1.0)) -> Integrand:
    return Integrand(lambda x: np.sin(2 * np.pi * x), cell, label="sin(2*pi*y)")


def inv_sqrt(cell=(0.0, 1.0)) -> Integrand:
    """``1 / (2 sqrt(y))``, unbounded at 0 (declared singular)."""
    return Integrand(lambda x: 0.5 / np.sqrt(x), cell, [0.0], label="1/(2*sqrt(y))")


def flagship(cell=(0.0, 1.0)) -> Integrand:
    """Derivative of ``x^2 sin(1/x^2)``; not absolutely integrable near 0."""
    return Integrand(_flagship, cell, [0.0], label="flagship")


INTEGRANDS = {
    "one": one,
    "y": ident,
    "sin2pi": sin2pi,
    "invsqrt": inv_sqrt,
    "flagship": flagship,
}


def named_integrand(name: str, cell=(0.0, 1.0)) -> Integrand:
    try:
        return INTEGRANDS[name](cell)
    except KeyError:
        raise ValueError(f"unknown integrand {name!r}; choose from {sorted(INTEGRANDS)}") from None
