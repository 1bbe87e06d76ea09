"""Covering lemmas on the line: a Besicovitch-type decomposition into
disjointed families and a greedy Vitali-type disjoint selection."""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .cells import Cell, as_cell
from .errors import BudgetExceeded

log = logging.getLogger(__name__)

MAX_FAMILIES = 5

# A float sum or difference is within half an ulp of the exact value, so
# comparisons that clear this relative margin are decided correctly in
# floating point; the rest fall back to exact rationals.
_REL = 2.0**-50
_TINY = 5e-324


@dataclass(frozen=True, order=True)
class CenteredInterval:
    """The closed interval ``[center - radius, center + radius]``."""

    center: float
    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.center) and np.isfinite(self.radius)):
            raise ValueError("center and radius must be finite")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius

    def covers(self, x: float) -> bool:
        """Exact test ``|x - center| <= radius`` (no rounding)."""
        d = abs(x - self.center)
        slack = _REL * d + _TINY
        if d + slack < self.radius:
            return True
        if d - slack > self.radius:
            return False
        return abs(Fraction(x) - Fraction(self.center)) <= Fraction(self.radius)

    def disjoint(self, other: "CenteredInterval") -> bool:
        """Closed-interval disjointness, exact; touching intervals are not disjoint."""
        a = abs(self.center - other.center)
        b = self.radius + other.radius
        slack = _REL * (a + b) + _TINY
        if a - slack > b:
            return True
        if a + slack < b:
            return False
        c1, r1 = Fraction(self.center), Fraction(self.radius)
        c2, r2 = Fraction(other.center), Fraction(other.radius)
        return abs(c1 - c2) > r1 + r2

    def as_cell(self) -> Cell:
        return Cell(self.lo, self.hi)


def _normalise(points, radii):
    pts = np.asarray(points, dtype=np.float64).ravel()
    rad = np.asarray(radii, dtype=np.float64).ravel()
    if rad.size == 1 and pts.size != 1:
        rad = np.full(pts.shape, float(rad[0]))
    if pts.shape != rad.shape:
        raise ValueError("need one radius per point")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(rad))):
        raise ValueError("points and radii must be finite")
    if np.any(rad <= 0):
        raise ValueError("radii must be positive")
    seen = {}
    for x, r in zip(pts.tolist(), rad.tolist()):
        if seen.setdefault(x, r) != r:
            raise ValueError(f"point {x} given two different radii")
    return seen


def _greedy_select(seen: dict) -> list[CenteredInterval]:
    # Decreasing radius, ties by center so the output is deterministic.
    order = sorted(seen.items(), key=lambda kv: (-kv[1], kv[0]))
    centers: list[float] = []
    by_center: dict[float, CenteredInterval] = {}
    chosen = []
    for x, r in order:
        # If some selected interval covers x, so does the nearest selected
        # center on that side: it was selected earlier (otherwise it would
        # have been covered itself) and therefore reaches at least as far.
        k = bisect.bisect_left(centers, x)
        near = centers[max(k - 1, 0) : k + 1]
        if any(by_center[c].covers(x) for c in near):
            continue
        J = CenteredInterval(x, r)
        bisect.insort(centers, x)
        by_center[x] = J
        chosen.append(J)
    return chosen


class _Family:
    """Pairwise disjoint intervals kept sorted by left end."""

    def __init__(self):
        self.keys: list[float] = []
        self.items: list[CenteredInterval] = []

    def accepts(self, J: CenteredInterval) -> bool:
        k = bisect.bisect_left(self.keys, J.lo)
        for j in (k - 1, k, k + 1):
            if 0 <= j < len(self.items) and not self.items[j].disjoint(J):
                return False
        return True

    def add(self, J: CenteredInterval):
        k = bisect.bisect_left(self.keys, J.lo)
        self.keys.insert(k, J.lo)
        self.items.insert(k, J)


def besicovitch_decompose(
    points: Iterable[float], radii, max_families: int = MAX_FAMILIES
) -> list[list[CenteredInterval]]:
    """Cover every point by at most ``max_families`` disjointed families.

    Intervals are picked greedily by decreasing radius whenever their center
    is still uncovered, then coloured first-fit into families whose members
    are pairwise disjoint as closed intervals.  Needing more than
    ``max_families`` families means something is broken and raises
    :class:`BudgetExceeded`.
    """
    seen = _normalise(points, radii)
    chosen = _greedy_select(seen)
    families: list[_Family] = []
    for J in chosen:
        for fam in families:
            if fam.accepts(J):
                fam.add(J)
                break
        else:
            if len(families) >= max_families:
                raise BudgetExceeded(
                    f"{len(chosen)} selected intervals need more than {max_families} families"
                )
            fam = _Family()
            fam.add(J)
            families.append(fam)
    log.info("besicovitch: %d points, %d selected, %d families", len(seen), len(chosen), len(families))
    return [fam.items for fam in families]


def verify_decomposition(points, radii, families) -> dict:
    """Brute-force audit: membership, coverage and pairwise disjointness."""
    seen = _normalise(points, radii)
    members = [J for fam in families for J in fam]
    from_input = all(seen.get(J.center) == J.radius for J in members)
    uncovered = [x for x in seen if not any(J.covers(x) for J in members)]
    clashes = []
    for f_idx, fam in enumerate(families):
        for a in range(len(fam)):
            for b in range(a + 1, len(fam)):
                if not fam[a].disjoint(fam[b]):
                    clashes.append((f_idx, fam[a], fam[b]))
    return {
        "families": len(families),
        "selected": len(members),
        "from_input": from_input,
        "uncovered": uncovered,
        "clashes": clashes,
        "ok": from_input and not uncovered and not clashes and len(families) <= MAX_FAMILIES,
    }


def families_as_json(families) -> list:
    return [[{"center": J.center, "radius": J.radius} for J in fam] for fam in families]


def vitali_greedy_select(cells: Sequence) -> list[Cell]:
    """Keep cells by decreasing length when they do not overlap a kept one.

    Overlap means a shared piece of positive length; touching is allowed.
    The result is sorted by left end.
    """
    cs = [as_cell(c) for c in cells]
    order = sorted(range(len(cs)), key=lambda k: (-cs[k].length, k))
    los: list[float] = []
    kept: list[Cell] = []
    for k in order:
        c = cs[k]
        j = bisect.bisect_right(los, c.lo)
        if j > 0 and kept[j - 1].hi > c.lo:
            continue
        if j < len(kept) and kept[j].lo < c.hi:
            continue
        los.insert(j, c.lo)
        kept.insert(j, c)
    return kept


__all__ = [
    "CenteredInterval",
    "besicovitch_decompose",
    "verify_decomposition",
    "families_as_json",
    "vitali_greedy_select",
    "MAX_FAMILIES",
]
