"""Riemann sums and Kurzweil-Henstock integrals by gauge refinement.

The integrator synthesises, for a decreasing schedule ``eps_k = tol * 2**-k``,
a gauge ``delta_k`` and evaluates Riemann sums over δ_k-fine divisions.
Two divisions are built per level from the same gauge with different Gauss
tag policies; the iteration stops once successive levels and the two
policies agree to within ``tol``.

The gauge is the pointwise minimum of

* ``h_base(eps)``               (global cap),
* ``c(eps) * dist(x, S)``       (vanishes linearly at declared points ``S``),
* ``kappa * |M(x)|``            (``M(x)`` is the cell of an adaptive mesh
  containing ``x``; the mesh is refined where two Gauss rules disagree),

and at each declared point ``s`` it takes a separate value: the reach of the
cell tagged at ``s``.  That cell is shrunk until an estimate of the integral
it drops (from the neighbouring dyadic shells) fits its share of the budget.
With ``kappa`` below the per-policy thresholds worked out in
:func:`_mesh_kappa`, Cousin bisection under this gauge reproduces the mesh
cells one-for-one, so the mesh *is* the δ-fine division.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .cells import AdditiveCellFn, Cell, PFamily, as_cell
from .errors import DepthExceeded, DomainError, NoConvergence, NonFiniteSample
from .gauge import (
    DEFAULT_DEPTH_CAP,
    DEFAULT_FLOOR_RATIO,
    Division,
    Gauge,
    TagPolicy,
    gauss,
    gauss_partition,
    gauss_split,
)
from .summation import compensated_sum

log = logging.getLogger(__name__)

DEFAULT_ORDER = 10
DEFAULT_ALT_ORDER = 8
DEFAULT_MAX_LEVELS = 40
# about 0.5 GB of mesh arrays; the flagship at tol=1e-6 needs under 1e6 cells
DEFAULT_MAX_CELLS = 6_000_000
_CHUNK = 1 << 20
_TAIL_RATIO_CAP = 0.9


class Integrand:
    """A representative ``f`` of a class of KH-integrable functions.

    ``fn`` is evaluated on numpy arrays.  At ``singular_points`` the
    representative is 0 by convention and ``fn`` is never called there;
    ``null_exceptions`` maps finitely many points to overriding values.
    """

    def __init__(
        self,
        fn: Callable,
        cell,
        singular_points: Iterable[float] = (),
        null_exceptions: Mapping[float, float] | Iterable | None = None,
        label: str | None = None,
    ):
        self.cell = as_cell(cell)
        self.fn = fn
        self.singular_points = tuple(sorted({float(s) for s in singular_points}))
        exc = dict(null_exceptions.items() if isinstance(null_exceptions, Mapping) else (null_exceptions or ()))
        self.null_exceptions = {float(k): float(v) for k, v in sorted(exc.items())}
        for p in self.singular_points + tuple(self.null_exceptions):
            if not self.cell.contains(p):
                raise DomainError(f"declared point {p} outside {self.cell}")
        self.label = label

    @property
    def special_points(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.singular_points) | set(self.null_exceptions)))

    def representative_value(self, p: float) -> float:
        """Value of the representative at a declared point."""
        if p in self.null_exceptions:
            return self.null_exceptions[p]
        if p in self.singular_points:
            return 0.0
        return float(self(np.array([p]))[0])

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        special = np.zeros(x.shape, dtype=bool)
        if self.singular_points:
            special |= np.isin(x, self.singular_points)
        if self.null_exceptions:
            special |= np.isin(x, list(self.null_exceptions))
        with np.errstate(all="ignore"):
            if special.any():
                y = np.zeros(x.shape)
                ok = ~special
                if ok.any():
                    y[ok] = np.broadcast_to(self.fn(x[ok]), x[ok].shape)
                for p, v in self.null_exceptions.items():
                    y[x == p] = v
            else:
                y = np.array(np.broadcast_to(self.fn(x), x.shape), dtype=np.float64)
        bad = ~np.isfinite(y)
        if bad.any():
            pts = x[bad][:5]
            raise NonFiniteSample(
                f"integrand {self.label or ''} is not finite at x={pts.tolist()}; "
                "declare singular points explicitly",
                pts.tolist(),
            )
        return float(y[0]) if scalar else y

    # linear structure on representatives

    def _combine(self, other: "Integrand", a: float, b: float) -> "Integrand":
        if other.cell != self.cell:
            raise DomainError(f"cells differ: {self.cell} vs {other.cell}")
        sing = set(self.singular_points) | set(other.singular_points)
        pts = set(self.null_exceptions) | set(other.null_exceptions)
        exc = {p: a * self.representative_value(p) + b * other.representative_value(p) for p in pts}
        f, g = self.fn, other.fn
        return Integrand(
            lambda x: a * f(x) + b * g(x),
            self.cell,
            sing - pts,
            exc,
            label=f"({a}*{self.label} + {b}*{other.label})",
        )

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def scaled(self, a: float) -> "Integrand":
        f = self.fn
        return Integrand(
            lambda x: a * f(x),
            self.cell,
            self.singular_points,
            {p: a * v for p, v in self.null_exceptions.items()},
            label=f"{a}*{self.label}",
        )

    def __mul__(self, a):
        return self.scaled(float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)

    def with_exceptions(self, exceptions: Mapping[float, float]) -> "Integrand":
        exc = dict(self.null_exceptions)
        exc.update({float(k): float(v) for k, v in exceptions.items()})
        return Integrand(self.fn, self.cell, self.singular_points, exc, label=self.label)

    def restrict(self, cell) -> "Integrand":
        cell = as_cell(cell)
        if not self.cell.contains_cell(cell):
            raise DomainError(f"{cell} not inside {self.cell}")
        return Integrand(
            self.fn,
            cell,
            [s for s in self.singular_points if cell.contains(s)],
            {p: v for p, v in self.null_exceptions.items() if cell.contains(p)},
            label=self.label,
        )

    def __repr__(self):
        return f"Integrand({self.label or self.fn!r} on [{self.cell.lo}, {self.cell.hi}])"


def constant(value: float, cell) -> Integrand:
    v = float(value)
    return Integrand(lambda x: np.full(np.shape(x), v), cell, label=repr(v))


# -- Riemann sums -----------------------------------------------------------


def riemann_sum(p: PFamily, f: Integrand) -> float:
    """``sum f(x) |J|`` over ``p``, lo-sorted, compensated."""
    if len(p) == 0:
        return 0.0
    if np.any(p.tag < f.cell.lo) or np.any(p.tag > f.cell.hi):
        raise DomainError(f"tags outside {f.cell}")
    order = p.order()
    tags, lengths = p.tag[order], (p.hi - p.lo)[order]
    terms = np.empty(tags.size)
    for s in range(0, tags.size, _CHUNK):
        terms[s : s + _CHUNK] = f(tags[s : s + _CHUNK]) * lengths[s : s + _CHUNK]
    return compensated_sum(terms)


def saks_henstock_indicator(f: Integrand, p: PFamily, F_ref: AdditiveCellFn) -> float:
    """``sum |f(x)|J| - F_ref(J)|`` over ``p`` (lo-sorted, compensated)."""
    order = p.order()
    lo, hi, tag = p.lo[order], p.hi[order], p.tag[order]
    terms = np.abs(f(tag) * (hi - lo) - F_ref.values(lo, hi))
    return compensated_sum(terms)


# -- gauges -----------------------------------------------------------------


def h_base(eps: float, L: float) -> float:
    return L * min(0.25, max(eps ** 0.25, 1.0 / 1024))


def distance_slope(eps: float) -> float:
    return min(0.5, max(eps ** 0.125, 1.0 / 16))


def singular_scale(eps: float, L: float) -> float:
    return L * min(0.25, eps * eps)


def _dist_to(x, pts: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if pts.size == 0:
        return np.full(x.shape, np.inf)
    k = np.searchsorted(pts, x)
    left = pts[np.clip(k - 1, 0, pts.size - 1)]
    right = pts[np.clip(k, 0, pts.size - 1)]
    return np.minimum(np.abs(x - left), np.abs(right - x))


def default_gauge(f: Integrand, i, eps: float) -> Gauge:
    """Distance-based gauge ``min(h_base, c * dist(x, S))`` off ``S``.

    ``S`` collects the singular points and null exceptions of ``f``; on
    ``S`` itself the gauge takes the separate value ``singular_scale(eps)``,
    which shrinks like ``eps**2``.  Every ingredient decreases with ``eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    i = as_cell(i)
    S = np.array([s for s in f.special_points if i.contains(s)])
    hb, c, sig = h_base(eps, i.length), distance_slope(eps), singular_scale(eps, i.length)

    def delta(x):
        x = np.asarray(x, dtype=np.float64)
        d = np.minimum(hb, c * _dist_to(x, S))
        if S.size:
            d = np.where(np.isin(x, S), sig, d)
        return d

    return Gauge(delta, i, anchors=S)


# -- results ----------------------------------------------------------------


@dataclass
class IntegralResult:
    value: float
    error_estimate: float
    divisions_used: int
    finest_cell: float
    alt_value: float = math.nan
    levels: int = 0
    cells: int = 0
    evaluations: int = 0
    converged: bool = True
    warnings: list = field(default_factory=list)
    history: list = field(default_factory=list)
    elapsed: float = 0.0
    mesh: "_Mesh | None" = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "alt_value": self.alt_value,
            "divisions_used": self.divisions_used,
            "finest_cell": self.finest_cell,
            "levels": self.levels,
            "cells": self.cells,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "warnings": list(self.warnings),
            "elapsed_s": self.elapsed,
        }

    def division(self, policy: TagPolicy | None = None) -> PFamily:
        """The δ-fine P-division behind :attr:`value` (or the alternate one)."""
        if self.mesh is None:
            raise ValueError("result carries no mesh")
        return self.mesh.division(policy or gauss(self.mesh.order))

    def gauge(self, panel: int = 0) -> Gauge:
        if self.mesh is None:
            raise ValueError("result carries no mesh")
        return self.mesh.gauge(panel)


# -- the adaptive mesh ------------------------------------------------------


def _mesh_kappa(*orders: int) -> float:
    """Scale of the mesh gauge ``kappa * |M(x)|``.

    A mesh cell is accepted by a Gauss policy iff ``kappa >= reach``; its
    parent (twice as long, tags falling in cells at most half its length)
    is accepted only if ``kappa >= 2 * reach``.  Any kappa in between
    makes Cousin bisection stop exactly on the mesh cells.
    """
    reach = [float(gauss_partition(n)[3].max()) for n in orders]
    kappa = 1.05 * max(reach)
    if not kappa < 2 * min(reach):
        raise ValueError(f"Gauss orders {orders} are too far apart to share one mesh")
    return kappa


def _eval_noise(t, v):
    """Rounding-level uncertainty of sampled values.

    An argument perturbed by one ulp moves ``f`` by about ``|x f'(x)| eps``;
    ``f'`` is estimated from neighbouring nodes of the same cell.  Nodes
    that coincide in floating point mean the cell is at the resolution
    limit; the noise is then infinite.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.abs(np.gradient(v, axis=1) / np.gradient(t, axis=1))
    slope = np.where(np.isnan(slope), np.inf, slope)
    return 16 * np.finfo(float).eps * (np.abs(v) + np.abs(t) * slope)


class _Mesh:
    """Adaptive dyadic mesh over a sequence of panels.

    Regular cells carry the order-n and order-n' Gauss values; anchor cells
    contain exactly one declared point and are tagged there.
    """

    def __init__(
        self, f: Integrand, edges, order: int, alt_order: int, depth_cap: int, floor: float, knots=(),
        max_cells: int = DEFAULT_MAX_CELLS,
    ):
        self.f = f
        self.max_cells = max_cells
        self.edges = np.asarray(edges, dtype=np.float64)
        self.L = float(self.edges[-1] - self.edges[0])
        self.order, self.alt_order = order, alt_order
        self.kappa = _mesh_kappa(order, alt_order)
        self.depth_cap = depth_cap
        self.floor = floor
        self.reach_max = float(max(gauss_partition(order)[3].max(), gauss_partition(alt_order)[3].max()))
        pts = [p for p in f.special_points if self.edges[0] <= p <= self.edges[-1]]
        self.anchors = np.array(pts, dtype=np.float64)
        self.anchor_values = np.array([f.representative_value(p) for p in pts])
        self.anchor_cap = self._anchor_caps(self.anchors, self.L, floor)
        self.evaluations = 0
        self.warnings: list[str] = []
        self.unmet_tail = 0.0
        self.tail_estimate = 0.0
        n = self.edges.size - 1
        self.lo = self.edges[:-1].copy()
        self.hi = self.edges[1:].copy()
        self.panel = np.arange(n)
        self.depth = np.zeros(n, dtype=np.int64)
        self._classify_and_evaluate(np.arange(n), fresh=True)
        k = np.unique(np.asarray(knots, dtype=np.float64))
        self.knots = k[(k > self.edges[0]) & (k < self.edges[-1])]
        self.cut_at_knots = False

    @staticmethod
    def _anchor_caps(A, L, floor):
        """Longest tag cell allowed at each declared point.

        A quarter of the span, and a quarter of the distance to the nearest
        other declared point (points within the floor count as one), so the
        middle half of every gap is left to regular cells.
        """
        cap = np.full(A.size, 0.25 * L)
        if A.size > 1:
            j = np.searchsorted(A, A - floor, side="left") - 1
            left = np.where(j >= 0, A - A[np.maximum(j, 0)], np.inf)
            j = np.searchsorted(A, A + floor, side="right")
            right = np.where(j < A.size, A[np.minimum(j, A.size - 1)] - A, np.inf)
            cap = np.minimum(cap, 0.25 * np.minimum(left, right))
        return np.maximum(cap, 2 * floor)

    # cell bookkeeping

    def _classify_and_evaluate(self, idx, fresh=False):
        lo, hi = self.lo[idx], self.hi[idx]
        A = self.anchors
        if A.size:
            k = np.searchsorted(A, lo, side="left")
            count = np.searchsorted(A, hi, side="right") - k
        else:
            k = np.zeros(idx.size, dtype=np.int64)
            count = np.zeros(idx.size, dtype=np.int64)
        if fresh:
            n = idx.size
            self.kind = np.zeros(n, dtype=np.int8)
            self.anchor = np.full(n, -1, dtype=np.int64)
            self.q = np.zeros(n)
            self.q2 = np.zeros(n)
            self.err = np.zeros(n)
            self.need_c = np.zeros(n)
        self.kind[idx] = np.where(count > 0, 1, 0)
        # declared points closer together than the floor cannot be separated;
        # such a cell is tagged at the first of them
        merged = (count > 1) & (hi - lo <= self.floor)
        if merged.any():
            self._note(f"declared points closer than the floor {self.floor:g} share one tag")
        self.anchor[idx] = np.where((count == 1) | merged, k, -1)
        reg = idx[count == 0]
        anc = idx[count > 0]
        if anc.size:
            self.q[anc] = np.where(
                self.anchor[anc] >= 0,
                self.anchor_values[np.maximum(self.anchor[anc], 0)] * (self.hi[anc] - self.lo[anc]),
                0.0,
            )
            self.q2[anc] = self.q[anc]
            self.err[anc] = 0.0
            self.need_c[anc] = 0.0
        if reg.size:
            self._evaluate_regular(reg)

    def _evaluate_regular(self, idx):
        n1, n2 = self.order, self.alt_order
        _, w1, _, r1 = gauss_partition(n1)
        _, w2, _, r2 = gauss_partition(n2)
        for s in range(0, idx.size, max(1, _CHUNK // (n1 + n2))):
            j = idx[s : s + _CHUNK // (n1 + n2)]
            lo, hi = self.lo[j], self.hi[j]
            h = hi - lo
            _, t1 = gauss_split(lo, hi, n1)
            _, t2 = gauss_split(lo, hi, n2)
            v1 = self.f(t1.ravel()).reshape(t1.shape)
            v2 = self.f(t2.ravel()).reshape(t2.shape)
            self.evaluations += t1.size + t2.size
            self.q[j] = h * (v1 @ w1)
            self.q2[j] = h * (v2 @ w2)
            noise = h * (_eval_noise(t1, v1) @ w1 + _eval_noise(t2, v2) @ w2)
            self.err[j] = np.maximum(np.abs(self.q[j] - self.q2[j]) - noise, 0.0)
            if self.anchors.size:
                need = np.maximum(
                    (r1[None, :] * h[:, None] / _dist_to(t1, self.anchors)).max(axis=1),
                    (r2[None, :] * h[:, None] / _dist_to(t2, self.anchors)).max(axis=1),
                )
                self.need_c[j] = need
            else:
                self.need_c[j] = 0.0

    def _split(self, mask):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return 0
        lo, hi = self.lo[idx], self.hi[idx]
        m = 0.5 * (lo + hi)
        deep = self.depth[idx] + 1
        if np.any(deep > self.depth_cap) or np.any((m <= lo) | (m >= hi)):
            bad = idx[(deep > self.depth_cap) | (m <= lo) | (m >= hi)][0]
            raise DepthExceeded(
                f"bisection depth exceeded {self.depth_cap} near x={self.lo[bad]!r}; "
                "the integrand is not resolved there (undeclared singular point?)"
            )
        if self.lo.size + idx.size > self.max_cells:
            raise NoConvergence(
                f"mesh would exceed {self.max_cells} cells; the integrand is not resolved "
                f"near x={float(self.lo[idx[0]])!r} at this tolerance"
            )
        keep = ~mask
        n_old = int(keep.sum())
        cat = lambda a, b, c: np.concatenate([a[keep], b, c])  # noqa: E731
        self.lo = cat(self.lo, lo, m)
        self.hi = cat(self.hi, m, hi)
        self.panel = cat(self.panel, self.panel[idx], self.panel[idx])
        self.depth = cat(self.depth, deep, deep)
        self.kind = cat(self.kind, self.kind[idx], self.kind[idx])
        self.anchor = cat(self.anchor, self.anchor[idx], self.anchor[idx])
        for name in ("q", "q2", "err", "need_c"):
            a = getattr(self, name)
            setattr(self, name, cat(a, a[idx], a[idx]))
        self._classify_and_evaluate(np.arange(n_old, self.lo.size))
        return idx.size

    def _insert_knots(self):
        """Cut regular cells at the knots strictly inside them.

        A knot inside an anchor cell is left alone: the partial tagged sum
        there is read off by :meth:`knot_panel_values`.  Cutting does not
        count towards the bisection depth.
        """
        if not self.knots.size:
            return 0
        self._sort()
        j = np.clip(np.searchsorted(self.lo, self.knots, side="right") - 1, 0, self.lo.size - 1)
        inside = (self.knots > self.lo[j]) & (self.knots < self.hi[j]) & (self.kind[j] == 0)
        if not inside.any():
            return 0
        j, x = j[inside], self.knots[inside]
        parents = np.unique(j)
        new_lo, new_hi, owner = [], [], []
        for p in parents.tolist():
            e = np.concatenate([[self.lo[p]], x[j == p], [self.hi[p]]])
            new_lo.append(e[:-1])
            new_hi.append(e[1:])
            owner.append(np.full(e.size - 1, p))
        owner = np.concatenate(owner)
        keep = np.ones(self.lo.size, dtype=bool)
        keep[parents] = False
        n_old = int(keep.sum())
        self.lo = np.concatenate([self.lo[keep], *new_lo])
        self.hi = np.concatenate([self.hi[keep], *new_hi])
        for name in ("panel", "depth", "kind", "anchor", "q", "q2", "err", "need_c"):
            a = getattr(self, name)
            setattr(self, name, np.concatenate([a[keep], a[owner]]))
        self.cut_at_knots = True
        self._classify_and_evaluate(np.arange(n_old, self.lo.size))
        return parents.size

    def _sort(self):
        order = np.lexsort((self.lo, self.panel))
        for name in ("lo", "hi", "panel", "depth", "kind", "anchor", "q", "q2", "err", "need_c"):
            setattr(self, name, getattr(self, name)[order])

    # refinement

    def refine(self, eps: float):
        """Refine until every cell meets the level-``eps`` requirements."""
        hb = h_base(eps, self.L)
        c = distance_slope(eps)
        density = 0.5 * eps / self.L
        min_len = self.floor / self.reach_max
        while True:
            self._insert_knots()
            while True:
                h = self.hi - self.lo
                reg = self.kind == 0
                want = reg & (
                    (self.err > density * h) | (self.reach_max * h > hb) | (self.need_c > c)
                )
                tiny = want & (h <= min_len)
                if tiny.any():
                    self._note(f"gauge clamped to floor {self.floor:g} on {int(tiny.sum())} cells")
                    want &= ~tiny
                want |= (self.kind == 1) & (self.anchor < 0)  # several anchors in one cell
                # the shells the tail estimate reads must be evaluated cells,
                # so a tag cell keeps clear of the next declared point
                if self.anchors.size:
                    cap = self.anchor_cap[np.maximum(self.anchor, 0)]
                    want |= (self.kind == 1) & (self.anchor >= 0) & (h > cap)
                if not self._split(want):
                    break
            if not self.anchors.size or not self._split(self._anchor_split_mask(eps)):
                if not self._insert_knots():
                    break
        self._sort()

    def _note(self, msg):
        if msg not in self.warnings:
            self.warnings.append(msg)
            log.warning(msg)

    def _anchor_split_mask(self, eps):
        self._sort()
        self.unmet_tail = 0.0
        self.tail_estimate = 0.0
        anc = np.flatnonzero(self.kind == 1)
        mask = np.zeros(self.lo.size, dtype=bool)
        if anc.size == 0:
            return mask
        budget = eps
        a = self.anchors[self.anchor[anc]]
        lo, hi = self.lo[anc], self.hi[anc]
        own = np.abs(self.anchor_values[self.anchor[anc]]) * (hi - lo)
        t_hi, r_hi, c_hi = self._side_tail(hi, hi - a, +1)
        t_lo, r_lo, c_lo = self._side_tail(lo, a - lo, -1)
        # A side ending at the end of the span has no shells to look at; it
        # borrows the shells on the other side of the cell, same width.
        for blocked, edge, w, d, t, r, c in (
            ((lo <= self.edges[0]) & (a > lo) & (hi < self.edges[-1]), hi, a - lo, +1, t_lo, r_lo, c_lo),
            ((hi >= self.edges[-1]) & (hi > a) & (lo > self.edges[0]), lo, hi - a, -1, t_hi, r_hi, c_hi),
        ):
            if blocked.any():
                t[blocked], r[blocked], c[blocked] = self._side_tail(edge[blocked], w[blocked], d)
        est = own + t_hi + t_lo
        self.tail_estimate = float(est.sum())
        split = np.zeros(anc.size, dtype=bool)
        if not est.sum() <= budget:
            # Water-filling: halve the cells holding the largest estimates
            # until the total fits; cells at the floor cannot shrink further.
            free = (hi - lo) > self.floor
            stuck = ~free & (est > budget / anc.size)
            bad = stuck & (np.maximum(r_hi, r_lo) >= _TAIL_RATIO_CAP)
            if bad.any():
                j = anc[bad][0]
                raise NoConvergence(
                    f"the integral near the declared point x={float(self.anchors[self.anchor[j]])!r} "
                    "does not vanish as the tagged cell shrinks (not KH-integrable?)"
                )
            if free.any():
                # Prefer the halvings that remove the most estimate per
                # regular cell they are likely to add next to the anchor.
                gain = 0.5 * own + t_hi * (1 - r_hi) + t_lo * (1 - r_lo)
                score = np.where(free, gain / (1.0 + c_hi + c_lo), -1.0)
                split = free & (score >= 0.9 * score.max())
            if stuck.any():
                self._note(f"gauge clamped to floor {self.floor:g} at declared points")
            if not split.any():
                self.unmet_tail = float(est.sum())
        # Both cells sharing an anchor must end up the same length: the gauge
        # has one value at the anchor, and a Cousin search would otherwise
        # accept the longer side's size on the shorter side too.
        after = np.where(split, 0.5, 1.0) * (hi - lo)
        group = self.anchor[anc]
        shortest = np.full(self.anchors.size, np.inf)
        np.minimum.at(shortest, group, after)
        split |= (hi - lo) > shortest[group] * (1 + 1e-12)
        mask[anc[split]] = True
        return mask

    def _side_tail(self, edge, w, direction):
        """Estimated integral dropped on one side of the anchors.

        With ``h = w`` the dropped width, let ``osc1`` and ``osc2`` be the
        oscillations (max - min of the running integral) over the shells
        ``[h, 2h]`` and ``[2h, 4h]`` beyond the cell, ``r = osc1 / osc2``
        (capped at 0.9) and ``s1`` the integral over the first shell.  A
        running integral behaving like ``|x|**p`` gives ``r = 2**-p``; its
        monotone part drops ``|s1| * r / (1 - r)`` (a geometric series of
        shells) and its oscillating part at most the envelope at ``h``,
        about ``osc1 * r / 2``.  The estimate is the larger of the two.  A
        running integral that does not shrink towards the anchor keeps
        ``r`` at the cap and the estimate large.

        Returns ``(estimate, r, cost)`` per cell, where ``cost`` extrapolates
        the cell counts of the two shells to the next one inwards.
        """
        out = np.zeros(edge.size)
        ratio = np.zeros(edge.size)
        cost = np.zeros(edge.size)
        on = np.flatnonzero(w > 0)
        if on.size == 0:
            return out, ratio, cost
        a0, a1 = self.edges[0], self.edges[-1]
        cum = np.concatenate([[0.0], np.cumsum(self.q)])
        for j in on:
            e, h = float(edge[j]), float(w[j])
            if (direction > 0 and e >= a1) or (direction < 0 and e <= a0):
                out[j] = np.inf
                ratio[j] = _TAIL_RATIO_CAP
                continue
            if direction > 0:
                b1, b2 = min(e + h, a1), min(e + 3 * h, a1)
                o1, o2 = self._osc(cum, e, b1), self._osc(cum, b1, b2)
                s1 = self._P(cum, np.array([b1]))[0] - self._P(cum, np.array([e]))[0]
            else:
                b1, b2 = max(e - h, a0), max(e - 3 * h, a0)
                o1, o2 = self._osc(cum, b1, e), self._osc(cum, b2, b1)
                s1 = self._P(cum, np.array([e]))[0] - self._P(cum, np.array([b1]))[0]
            if o2 > 0:
                r = min(o1 / o2, _TAIL_RATIO_CAP)
            else:
                r = _TAIL_RATIO_CAP if o1 > 0 else 0.0
            out[j] = max(abs(s1) * r / (1.0 - r), 0.5 * o1 * r)
            ratio[j] = r
            n1 = max(self._count(min(e, b1), max(e, b1)), 1)
            n2 = max(self._count(min(b1, b2), max(b1, b2)), 1)
            cost[j] = n1 * n1 / n2
        return out, ratio, cost

    def _count(self, a, b):
        """Number of mesh cells meeting ``(a, b)``."""
        return int(np.searchsorted(self.lo, b, side="left") - np.searchsorted(self.hi, a, side="right"))

    def _osc(self, cum, a, b):
        """max - min of the running mesh integral over ``[a, b]``."""
        if not b > a:
            return 0.0
        k1 = np.searchsorted(self.lo, a, side="right")
        k2 = np.searchsorted(self.hi, b, side="left")
        vals = np.concatenate([cum[k1 : k2 + 1], self._P(cum, np.array([a, b]))])
        return float(vals.max() - vals.min())

    def _P(self, cum, x):
        lo, hi = self.lo, self.hi
        k = np.clip(np.searchsorted(lo, x, side="right") - 1, 0, lo.size - 1)
        frac = np.clip((x - lo[k]) / (hi[k] - lo[k]), 0.0, 1.0)
        return cum[k] + frac * self.q[k]

    # sums

    def totals(self):
        return compensated_sum(self.q), compensated_sum(self.q2)

    def panel_values(self, which="q"):
        vals = getattr(self, which)
        bounds = np.searchsorted(self.panel, np.arange(self.edges.size), side="left")
        return np.array([compensated_sum(vals[bounds[p] : bounds[p + 1]]) for p in range(self.edges.size - 1)])

    def knot_panel_values(self, points, which="q"):
        """Integrals between consecutive ``points`` (which include both ends).

        A point inside an anchor cell takes the proportional share of that
        cell's tagged term, i.e. the Riemann sum of the division restricted
        to the left part.
        """
        self._sort()
        vals = getattr(self, which)
        lo, hi = self.lo, self.hi
        n = lo.size
        cuts = []
        for x in np.asarray(points, dtype=np.float64):
            if x >= hi[-1]:
                cuts.append((n, 0.0))
                continue
            j = int(np.clip(np.searchsorted(lo, x, side="right") - 1, 0, n - 1))
            part = 0.0 if x <= lo[j] else vals[j] * (x - lo[j]) / (hi[j] - lo[j])
            cuts.append((j, part))
        out = np.empty(len(cuts) - 1)
        for k in range(len(cuts) - 1):
            (ja, pa), (jb, pb) = cuts[k], cuts[k + 1]
            out[k] = compensated_sum(np.concatenate([vals[ja:jb], [-pa, pb]]))
        return out

    # the division / gauge view

    def division(self, policy: TagPolicy) -> Division:
        if policy.kind != "gauss":
            raise ValueError("the mesh supports Gauss tag policies only")
        reg = self.kind == 0
        e, t = gauss_split(self.lo[reg], self.hi[reg], policy.order)
        anc = ~reg
        lo = np.concatenate([e[:, :-1].ravel(), self.lo[anc]])
        hi = np.concatenate([e[:, 1:].ravel(), self.hi[anc]])
        tag = np.concatenate([t.ravel(), self.anchors[self.anchor[anc]]])
        order = np.argsort(lo, kind="stable")
        cell = Cell(self.edges[0], self.edges[-1])
        return Division(lo[order], hi[order], tag[order], cell, policy, int(self.depth.max()), self.warnings)

    def gauge(self, panel: int = 0, eps: float | None = None) -> Gauge:
        """Piecewise gauge whose Cousin division of one panel is the mesh."""
        if self.cut_at_knots:
            raise ValueError("the mesh was cut at grid knots; no dyadic gauge reproduces it")
        sel = self.panel == panel
        lo, hi, kind, anchor = self.lo[sel], self.hi[sel], self.kind[sel], self.anchor[sel]
        knots = np.concatenate([lo, hi[-1:]])
        size = self.kappa * (hi - lo)
        A = self.anchors
        reach = {}
        for j in np.flatnonzero(kind == 1):
            a = float(A[anchor[j]])
            reach[a] = max(reach.get(a, 0.0), max(a - lo[j], hi[j] - a))
        base_eps = self._eps if eps is None else eps
        hb, c = h_base(base_eps, self.L), distance_slope(base_eps)
        pts = np.array(sorted(reach))
        vals = np.array([reach[p] for p in pts])

        def delta(x):
            x = np.asarray(x, dtype=np.float64)
            k = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, lo.size - 1)
            d = size[k]
            at_knot = (x == knots[k]) & (k > 0)
            d = np.where(at_knot, np.minimum(d, size[np.maximum(k - 1, 0)]), d)
            d = np.minimum(d, np.minimum(hb, c * _dist_to(x, A)))
            if pts.size:
                hit = np.isin(x, pts)
                if hit.any():
                    d = np.where(hit, vals[np.clip(np.searchsorted(pts, x), 0, pts.size - 1)], d)
            return d

        cell = Cell(self.edges[panel], self.edges[panel + 1])
        # c * dist(x, anchors) is legitimately tiny next to an anchor; the
        # usual floor would only report a clamp that changes nothing.
        return Gauge(delta, cell, floor=np.finfo(np.float64).tiny, anchors=pts)


# -- the integrator ---------------------------------------------------------


@dataclass
class EngineConfig:
    order: int = DEFAULT_ORDER
    alt_order: int = DEFAULT_ALT_ORDER
    max_levels: int = DEFAULT_MAX_LEVELS
    depth_cap: int = DEFAULT_DEPTH_CAP
    floor_ratio: float = DEFAULT_FLOOR_RATIO
    max_cells: int = DEFAULT_MAX_CELLS

    @classmethod
    def from_policies(cls, policy="gauss10", alt_policy="gauss8", **kw) -> "EngineConfig":
        p = policy if isinstance(policy, TagPolicy) else TagPolicy.parse(policy)
        q = alt_policy if isinstance(alt_policy, TagPolicy) else TagPolicy.parse(alt_policy)
        if p.kind != "gauss" or q.kind != "gauss":
            raise ValueError("kh_integrate needs Gauss tag policies (e.g. gauss10, gauss8)")
        if p.order == q.order:
            raise ValueError("primary and alternate tag policies must differ")
        return cls(order=p.order, alt_order=q.order, **kw)


def _run(f: Integrand, edges, tol: float, config: EngineConfig, knots=()):
    """Shared driver: returns (mesh, result) after the stopping rule fires."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    edges = np.asarray(edges, dtype=np.float64)
    L = float(edges[-1] - edges[0])
    mesh = _Mesh(f, edges, config.order, config.alt_order, config.depth_cap, config.floor_ratio * L, knots, config.max_cells)
    prev = None
    history = []
    for k in range(config.max_levels):
        eps = tol * 2.0 ** -k
        mesh._eps = eps
        mesh.refine(eps)
        s, s_alt = mesh.totals()
        d_prev = abs(s - prev) if prev is not None else math.inf
        d_alt = abs(s - s_alt)
        history.append({"level": k, "eps": eps, "value": s, "alt": s_alt, "cells": int(mesh.lo.size)})
        log.debug("level %d eps=%g S=%.16g S'=%.16g cells=%d", k, eps, s, s_alt, mesh.lo.size)
        if mesh.unmet_tail >= tol:
            raise NoConvergence(
                f"declared points leave an estimated {mesh.unmet_tail:.3g} unresolved at the "
                f"gauge floor {mesh.floor:g}, above tol={tol:g}",
                best=s,
                error_estimate=mesh.unmet_tail,
            )
        # what the anchor cells drop is invisible to both differences, so it
        # is added on top
        err = max(d_prev, d_alt) + mesh.tail_estimate
        if d_prev < tol and d_alt < tol and err < tol:
            res = IntegralResult(
                value=s,
                error_estimate=err,
                divisions_used=2 * (k + 1),
                finest_cell=float(np.min(mesh.hi - mesh.lo)),
                alt_value=s_alt,
                levels=k + 1,
                cells=int(mesh.lo.size),
                evaluations=mesh.evaluations,
                warnings=list(mesh.warnings),
                history=history,
                elapsed=time.perf_counter() - t0,
                mesh=mesh,
            )
            return mesh, res
        prev = s
    raise NoConvergence(
        f"no stabilisation after {config.max_levels} levels (last |dS|={d_prev:.3g}, "
        f"|S-S'|={d_alt:.3g})",
        best=prev,
        error_estimate=max(d_prev, d_alt),
    )


def kh_integrate(f: Integrand, i=None, tol: float = 1e-8, config: EngineConfig | None = None, **kw) -> IntegralResult:
    """Kurzweil-Henstock integral of ``f`` over ``i`` (default: ``f.cell``).

    Raises :class:`NoConvergence` when the schedule runs out of levels or the
    integral near a declared point does not vanish, and
    :class:`DepthExceeded` when bisection cannot resolve the integrand.
    """
    i = f.cell if i is None else as_cell(i)
    if not f.cell.contains_cell(i):
        raise DomainError(f"{i} not inside {f.cell}")
    config = config or EngineConfig(**kw)
    _, res = _run(f, [i.lo, i.hi], tol, config)
    return res


def integrate_panels(f: Integrand, edges, tol: float, config: EngineConfig | None = None):
    """Integrals over consecutive panels ``[edges[k], edges[k+1]]`` with one
    shared refinement; returns ``(panel_values, result)``.

    The mesh is refined over the whole span as for :func:`kh_integrate`;
    regular cells are cut at the interior edges, while an edge that falls
    inside a cell tagged at a declared point splits that cell's term
    proportionally.  The latter is what the restricted tagged division
    sums to, and its error is covered by the tail estimate near declared
    points that the result's ``error_estimate`` already includes.
    """
    config = config or EngineConfig()
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    mesh, res = _run(f, [edges[0], edges[-1]], tol, config, knots=edges[1:-1])
    return mesh.knot_panel_values(edges), res
