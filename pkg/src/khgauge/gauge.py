"""Gauges, δ-fineness and constructive Cousin divisions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .cells import Cell, PFamily
from .errors import DepthExceeded

log = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 60
DEFAULT_FLOOR_RATIO = 1e-15


class Gauge:
    """Strictly positive function on a cell.

    ``delta`` must accept numpy arrays.  Values below ``floor`` are clamped
    up to it and the clamp is recorded in :attr:`clamped` so callers can
    report what was actually enforced.  ``anchors`` are points (typically
    declared singular points) that a Gauss tag policy may use as tags.
    """

    def __init__(
        self,
        delta: Callable,
        domain: Cell,
        floor: float | None = None,
        anchors: Sequence[float] = (),
    ):
        self.domain = domain
        self._delta = delta
        self.floor = DEFAULT_FLOOR_RATIO * domain.length if floor is None else float(floor)
        if not self.floor > 0:
            raise ValueError("gauge floor must be positive")
        self.anchors = tuple(sorted({float(a) for a in anchors if domain.contains(a)}))
        self.clamped = False

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        d = np.asarray(self._delta(x), dtype=np.float64)
        if d.shape != x.shape:
            d = np.broadcast_to(d, x.shape).copy()
        low = ~(d >= self.floor)  # NaN counts as too small
        if np.any(low):
            self.clamped = True
            d = np.where(low, self.floor, d)
        return d if d.ndim else float(d)

    def pointwise_min(self, other: "Gauge") -> "Gauge":
        return Gauge(
            lambda x: np.minimum(self(x), other(x)),
            self.domain,
            floor=min(self.floor, other.floor),
            anchors=self.anchors + other.anchors,
        )


def constant_gauge(value: float, domain: Cell, **kw) -> Gauge:
    return Gauge(lambda x: np.full(np.shape(x), float(value)), domain, **kw)


# -- tag policies -----------------------------------------------------------


@dataclass(frozen=True)
class TagPolicy:
    """How candidate tags are tried on a cell before it is bisected.

    ``midpoint-first`` and ``endpoint-first`` try single tags at
    ``{mid, lo, hi}`` in the stated order.  ``gauss`` splits the cell into
    the weight-partition of the ``order``-point Gauss-Legendre rule, each
    subcell tagged at its node; failing that, a single tag at an anchor
    inside the cell is tried.
    """

    kind: str
    order: int = 0

    def __post_init__(self):
        if self.kind not in ("midpoint-first", "endpoint-first", "gauss"):
            raise ValueError(f"unknown tag policy {self.kind!r}")
        if self.kind == "gauss" and self.order < 1:
            raise ValueError("gauss policy needs order >= 1")

    @property
    def name(self) -> str:
        return f"gauss{self.order}" if self.kind == "gauss" else self.kind

    @classmethod
    def parse(cls, text: str) -> "TagPolicy":
        text = text.strip().lower()
        if text.startswith("gauss"):
            return cls("gauss", int(text[5:] or 10))
        return cls(text)


MIDPOINT_FIRST = TagPolicy("midpoint-first")
ENDPOINT_FIRST = TagPolicy("endpoint-first")


def gauss(order: int) -> TagPolicy:
    return TagPolicy("gauss", order)


@lru_cache(maxsize=None)
def gauss_partition(order: int):
    """Nodes, weights and subcell edges of the Gauss rule on ``[0, 1]``.

    The weights partition ``[0, 1]`` into consecutive subcells and every
    node lies inside its own subcell, so one application of the rule to a
    cell is a Riemann sum over a tagged division of that cell.  Also
    returns the largest tag-to-far-edge distance (relative to the cell
    length) over the subcells.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    edges = np.concatenate([[0.0], np.cumsum(weights)])
    edges[-1] = 1.0
    if not np.all((edges[:-1] < nodes) & (nodes < edges[1:])):
        raise AssertionError(f"Gauss nodes of order {order} do not interlace the weights")
    reach = np.maximum(nodes - edges[:-1], edges[1:] - nodes)
    for a in (nodes, weights, edges, reach):
        a.flags.writeable = False
    return nodes, weights, edges, reach


def gauss_split(lo, hi, order: int):
    """Subcell edges ``(m, order+1)`` and tags ``(m, order)`` for each cell."""
    nodes, _, edges, _ = gauss_partition(order)
    lo = np.asarray(lo, dtype=np.float64)[:, None]
    hi = np.asarray(hi, dtype=np.float64)[:, None]
    h = hi - lo
    e = lo + h * edges[None, :]
    e[:, 0] = lo[:, 0]
    e[:, -1] = hi[:, 0]
    t = np.clip(lo + h * nodes[None, :], e[:, :-1], e[:, 1:])
    return e, t


# -- fineness ---------------------------------------------------------------


def _fits(lo, hi, x, d):
    return (lo >= x - d) & (hi <= x + d)


def is_fine(p: PFamily, g: Gauge) -> bool:
    """True iff every ``(J, x)`` of ``p`` has ``J`` inside ``[x - δ(x), x + δ(x)]``."""
    if len(p) == 0:
        return True
    return bool(np.all(_fits(p.lo, p.hi, p.tag, g(p.tag))))


# -- Cousin bisection -------------------------------------------------------


class Division(PFamily):
    """A P-division produced by :func:`cousin_division` plus build metadata."""

    __slots__ = ("cell", "policy", "max_depth", "warnings")

    def __init__(self, lo, hi, tag, cell, policy, max_depth, warnings):
        super().__init__(lo, hi, tag, check=False)
        self.cell = cell
        self.policy = policy
        self.max_depth = max_depth
        self.warnings = tuple(warnings)


def cousin_division(
    i: Cell,
    g: Gauge,
    policy: TagPolicy = MIDPOINT_FIRST,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> Division:
    """δ-fine P-division of ``i`` by recursive bisection.

    A pending cell is accepted as soon as one candidate tag (or, for the
    Gauss policy, the whole Gauss split) is δ-fine; otherwise it is
    bisected at its midpoint.  The work is done breadth-first on arrays,
    which yields the same cells as the depth-first recursion.
    """
    g.clamped = False
    anchors = np.asarray(g.anchors, dtype=np.float64)
    out_lo, out_hi, out_tag = [], [], []
    lo = np.array([i.lo])
    hi = np.array([i.hi])
    depth = 0
    while lo.size:
        if depth > depth_cap:
            raise DepthExceeded(
                f"bisection depth exceeded {depth_cap} near x={lo[0]!r} "
                f"({lo.size} cells pending); the gauge is below what the policy can honour"
            )
        done = np.zeros(lo.size, dtype=bool)
        if policy.kind == "gauss":
            e, t = gauss_split(lo, hi, policy.order)
            ok = np.all(_fits(e[:, :-1], e[:, 1:], t, g(t)), axis=1)
            if np.any(ok):
                out_lo.append(e[ok, :-1].ravel())
                out_hi.append(e[ok, 1:].ravel())
                out_tag.append(t[ok].ravel())
                done |= ok
            if anchors.size and not np.all(done):
                _accept_anchor_tags(lo, hi, g, anchors, done, out_lo, out_hi, out_tag)
        else:
            mid = 0.5 * (lo + hi)
            order = (mid, lo, hi) if policy.kind == "midpoint-first" else (lo, hi, mid)
            for cand in order:
                todo = ~done
                if not np.any(todo):
                    break
                x = cand[todo]
                ok = _fits(lo[todo], hi[todo], x, g(x))
                if np.any(ok):
                    idx = np.flatnonzero(todo)[ok]
                    out_lo.append(lo[idx])
                    out_hi.append(hi[idx])
                    out_tag.append(x[ok])
                    done[idx] = True
        lo, hi = lo[~done], hi[~done]
        if lo.size:
            m = 0.5 * (lo + hi)
            if np.any((m <= lo) | (m >= hi)):
                raise DepthExceeded(f"cells collapsed in floating point near x={lo[0]!r}")
            lo, hi = np.concatenate([lo, m]), np.concatenate([m, hi])
            depth += 1
    flo = np.concatenate(out_lo)
    order = np.argsort(flo, kind="stable")
    warnings = []
    if g.clamped:
        warnings.append(f"gauge clamped to floor {g.floor:g}")
        log.warning("gauge clamped to floor %g on %s", g.floor, i)
    return Division(
        flo[order],
        np.concatenate(out_hi)[order],
        np.concatenate(out_tag)[order],
        cell=i,
        policy=policy,
        max_depth=depth,
        warnings=warnings,
    )


def _accept_anchor_tags(lo, hi, g, anchors, done, out_lo, out_hi, out_tag):
    todo = np.flatnonzero(~done)
    k = np.searchsorted(anchors, lo[todo], side="left")
    has = k < anchors.size
    idx, k = todo[has], k[has]
    a = anchors[k]
    inside = a <= hi[idx]
    idx, a = idx[inside], a[inside]
    if idx.size == 0:
        return
    ok = _fits(lo[idx], hi[idx], a, g(a))
    idx, a = idx[ok], a[ok]
    out_lo.append(lo[idx])
    out_hi.append(hi[idx])
    out_tag.append(a)
    done[idx] = True
