"""Cells, tagged families and additive cell functions on the real line."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, OverlapError, TagError


@dataclass(frozen=True, order=True)
class Cell:
    """Nondegenerate compact interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise DomainError(f"not a nondegenerate cell: [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_cell(self, other: "Cell") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def split(self, m: float) -> tuple["Cell", "Cell"]:
        return Cell(self.lo, m), Cell(m, self.hi)

    def __iter__(self):
        yield self.lo
        yield self.hi


def length(c: Cell) -> float:
    return c.hi - c.lo


def nonoverlapping(a: Cell, b: Cell) -> bool:
    """True iff the intersection of ``a`` and ``b`` is empty or one point."""
    return min(a.hi, b.hi) <= max(a.lo, b.lo)


@dataclass(frozen=True)
class TaggedCell:
    cell: Cell
    tag: float

    def __post_init__(self):
        if not self.cell.contains(self.tag):
            raise TagError(f"tag {self.tag} outside {self.cell}")


class PFamily:
    """Finite tagged family of pairwise non-overlapping cells.

    Stored column-wise (``lo``, ``hi``, ``tag`` arrays) so that families
    with millions of members stay cheap.  Insertion order is kept;
    reductions go through :meth:`order`, which sorts by left endpoint.
    """

    __slots__ = ("lo", "hi", "tag")

    def __init__(self, lo, hi, tag, *, check: bool = True):
        self.lo = np.asarray(lo, dtype=np.float64).copy()
        self.hi = np.asarray(hi, dtype=np.float64).copy()
        self.tag = np.asarray(tag, dtype=np.float64).copy()
        if not (self.lo.shape == self.hi.shape == self.tag.shape) or self.lo.ndim != 1:
            raise ValueError("lo, hi and tag must be 1-d arrays of equal length")
        for a in (self.lo, self.hi, self.tag):
            a.flags.writeable = False
        if check:
            _check_family(self.lo, self.hi, self.tag)

    @classmethod
    def empty(cls) -> "PFamily":
        return cls([], [], [], check=False)

    def __len__(self) -> int:
        return self.lo.size

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def items(self) -> tuple[TaggedCell, ...]:
        return tuple(
            TaggedCell(Cell(a, b), t)
            for a, b, t in zip(self.lo.tolist(), self.hi.tolist(), self.tag.tolist())
        )

    def __iter__(self):
        return iter(self.items)

    def order(self) -> np.ndarray:
        """Stable permutation sorting the members by left endpoint."""
        return np.argsort(self.lo, kind="stable")

    def body_measure(self) -> float:
        return float(np.sum(self.lengths))

    def concat(self, other: "PFamily") -> "PFamily":
        return PFamily(
            np.concatenate([self.lo, other.lo]),
            np.concatenate([self.hi, other.hi]),
            np.concatenate([self.tag, other.tag]),
        )

    def __eq__(self, other):
        if not isinstance(other, PFamily):
            return NotImplemented
        return (
            np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
            and np.array_equal(self.tag, other.tag)
        )

    def __repr__(self):
        return f"PFamily(n={len(self)})"


def _check_family(lo, hi, tag):
    bad = np.flatnonzero(~(lo < hi))
    if bad.size:
        raise ValueError(f"degenerate cell at index {bad[0]}: [{lo[bad[0]]}, {hi[bad[0]]}]")
    bad = np.flatnonzero((tag < lo) | (tag > hi))
    if bad.size:
        i = bad[0]
        raise TagError(f"tag {tag[i]} outside [{lo[i]}, {hi[i]}] (index {i})")
    if lo.size < 2:
        return
    order = np.argsort(lo, kind="stable")
    slo, shi = lo[order], hi[order]
    bad = np.flatnonzero(shi[:-1] > slo[1:])
    if bad.size:
        i, j = order[bad[0]], order[bad[0] + 1]
        raise OverlapError(
            f"cells [{lo[i]}, {hi[i]}] (index {i}) and [{lo[j]}, {hi[j]}] (index {j}) overlap"
        )


def validate_pfamily(items: Iterable) -> PFamily:
    """Build a :class:`PFamily` from ``TaggedCell`` or ``((lo, hi), tag)`` items.

    Raises :class:`TagError` for a tag outside its cell and
    :class:`OverlapError` for two cells sharing positive length (duplicate
    pairs included).
    """
    los, his, tags = [], [], []
    for it in items:
        if isinstance(it, TaggedCell):
            c, t = it.cell, it.tag
        else:
            c, t = it
            if not isinstance(c, Cell):
                c = Cell(*c)
        los.append(c.lo)
        his.append(c.hi)
        tags.append(float(t))
    return PFamily(los, his, tags)


def is_pdivision(p: PFamily, i: Cell) -> bool:
    """True iff the cells of ``p`` chain exactly from ``i.lo`` to ``i.hi``."""
    if len(p) == 0:
        return False
    order = p.order()
    lo, hi = p.lo[order], p.hi[order]
    return bool(
        lo[0] == i.lo and hi[-1] == i.hi and np.array_equal(hi[:-1], lo[1:])
    )


class AdditiveCellFn:
    """Additive cell function stored through its point function.

    ``point_fn`` is normalised to vanish at ``domain.lo``; the value on a
    cell ``J`` is ``point_fn(max J) - point_fn(min J)``.
    """

    def __init__(self, point_fn: Callable, domain: Cell, *, normalise: bool = True):
        self.domain = domain
        self._raw = point_fn
        self._offset = float(np.asarray(point_fn(np.float64(domain.lo)))) if normalise else 0.0

    def point(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self._raw(x), dtype=np.float64) - self._offset
        return out if out.ndim else float(out)

    __call__ = point

    def values(self, lo, hi) -> np.ndarray:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        d = self.domain
        if np.any(lo < d.lo) or np.any(hi > d.hi):
            raise DomainError(f"cells not contained in {d}")
        return self.point(hi) - self.point(lo)

    def point_from_cells(self, x):
        """Rebuild the point function from cell values on ``[lo, x]``."""
        x = np.asarray(x, dtype=np.float64)
        lo = np.full_like(x, self.domain.lo)
        out = np.where(x > self.domain.lo, self.values(lo, x), 0.0)
        return out if out.ndim else float(out)


def cell_value(F: AdditiveCellFn, j: Cell) -> float:
    if not F.domain.contains_cell(j):
        raise DomainError(f"{j} not contained in {F.domain}")
    return float(F.point(j.hi)) - float(F.point(j.lo))


def as_cell(c) -> Cell:
    if isinstance(c, Cell):
        return c
    lo, hi = c
    return Cell(lo, hi)


def cells_from_edges(edges: Sequence[float]) -> list[Cell]:
    return [Cell(a, b) for a, b in zip(edges[:-1], edges[1:])]
