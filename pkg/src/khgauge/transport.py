"""Change-of-variable maps, the transport operator and the checks built on it.

A :class:`BiACMap` packs a homeomorphism between two cells together with its
inverse and both derivatives in closed form.  ``transport_apply`` turns an
integrand ``f`` on the codomain into ``x -> sigma * f(phi(x)) * phi'(x)`` on
the domain.  The remaining functions compare integrals and Alexiewicz norms
before and after transport, and probe absolute continuity empirically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cantor import DEFAULT_STAGE, cantor_function
from .cells import AdditiveCellFn, Cell, as_cell
from .errors import DomainError, DomainMismatch, NotIncreasing
from .indefinite import alexiewicz_norm
from .integrate import EngineConfig, Integrand, kh_integrate

log = logging.getLogger(__name__)


# -- sign and maps ----------------------------------------------------------


@dataclass(frozen=True)
class SignFlag:
    sigma: int = 1

    def __post_init__(self):
        if self.sigma not in (-1, 1):
            raise ValueError(f"sign must be -1 or +1, got {self.sigma!r}")

    def __int__(self):
        return self.sigma

    def __float__(self):
        return float(self.sigma)

    @classmethod
    def of(cls, s) -> "SignFlag":
        if isinstance(s, SignFlag):
            return s
        v = float(s)
        if v not in (-1.0, 1.0):
            raise ValueError(f"sign must be -1 or +1, got {s!r}")
        return cls(int(v))


def _vec(fn: Callable) -> Callable:
    def wrapped(x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(all="ignore"):
            y = np.asarray(fn(x), dtype=np.float64)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape).copy()
        return y if y.ndim else float(y)

    return wrapped


@dataclass(frozen=True)
class BiACMap:
    """A monotone homeomorphism ``domain -> codomain`` with derivatives.

    ``exceptions`` lists the domain points where ``fderiv`` is undefined and
    ``inverse_exceptions`` the codomain points where ``ideriv`` is; the
    latter default to the images of the former.  Construction checks the
    endpoint condition, strict monotonicity and ``inverse(forward(x)) == x``
    on a sample grid.
    """

    domain: Cell
    codomain: Cell
    forward: Callable
    fderiv: Callable
    inverse: Callable
    ideriv: Callable
    exceptions: tuple = ()
    inverse_exceptions: tuple | None = None
    claimed_biAC: bool = True
    label: str = "map"
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("domain", as_cell(self.domain))
        set_("codomain", as_cell(self.codomain))
        for name in ("forward", "fderiv", "inverse", "ideriv"):
            set_(name, _vec(getattr(self, name)))
        exc = tuple(sorted({float(e) for e in self.exceptions}))
        for e in exc:
            if not self.domain.contains(e):
                raise DomainError(f"exception {e} outside {self.domain}")
        set_("exceptions", exc)
        if self.inverse_exceptions is None:
            inv = tuple(self._image(np.array(exc)).tolist()) if exc else ()
        else:
            inv = self.inverse_exceptions
        set_("inverse_exceptions", tuple(sorted({float(e) for e in inv})))
        if self.check:
            self.validate()

    @property
    def increasing(self) -> bool:
        return bool(self.forward(self.domain.hi) > self.forward(self.domain.lo))

    def _image(self, x):
        """``forward`` with domain endpoints sent exactly to codomain endpoints."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(self.forward(x), dtype=np.float64)
        lo_img, hi_img = (self.codomain.lo, self.codomain.hi) if self.increasing else (self.codomain.hi, self.codomain.lo)
        y = np.where(x == self.domain.lo, lo_img, y)
        return np.where(x == self.domain.hi, hi_img, y)

    def preimage(self, y):
        """``inverse`` with codomain endpoints sent exactly to domain endpoints."""
        y = np.asarray(y, dtype=np.float64)
        x = np.asarray(self.inverse(y), dtype=np.float64)
        lo_pre, hi_pre = (self.domain.lo, self.domain.hi) if self.increasing else (self.domain.hi, self.domain.lo)
        x = np.where(y == self.codomain.lo, lo_pre, x)
        return np.where(y == self.codomain.hi, hi_pre, x)

    def validate(self, n: int = 257) -> None:
        d, c = self.domain, self.codomain
        ends = np.array([self.forward(d.lo), self.forward(d.hi)])
        want = np.array([c.lo, c.hi]) if ends[1] > ends[0] else np.array([c.hi, c.lo])
        ulp = np.spacing(max(abs(c.lo), abs(c.hi), np.finfo(float).tiny))
        if np.any(np.abs(ends - want) > 4 * ulp):
            raise DomainError(f"{self.label}: endpoints map to {ends.tolist()}, expected {want.tolist()}")
        x = np.linspace(d.lo, d.hi, n)
        y = self._image(x)
        dy = np.diff(y)
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise NotIncreasing(f"{self.label}: not strictly monotone on a {n}-point grid")
        back = self.preimage(y)
        if np.any(np.abs(back - x) > 1e-12 * np.maximum(1.0, np.abs(x))):
            worst = float(np.max(np.abs(back - x)))
            raise DomainError(f"{self.label}: inverse(forward(x)) misses x by {worst:.3g}")

    def inverse_pack(self) -> "BiACMap":
        return BiACMap(
            self.codomain,
            self.domain,
            self.inverse,
            self.ideriv,
            self.forward,
            self.fderiv,
            self.inverse_exceptions,
            self.exceptions,
            self.claimed_biAC,
            f"inverse({self.label})",
            check=False,
        )


def identity_map(cell=(0.0, 1.0)) -> BiACMap:
    cell = as_cell(cell)
    one = lambda x: np.ones_like(x)  # noqa: E731
    return BiACMap(cell, cell, lambda x: x, one, lambda y: y, one, label="identity")


def power_map(k: float) -> BiACMap:
    """``x**k`` on ``[0, 1]`` for ``k >= 1``; the inverse's derivative blows up at 0."""
    k = float(k)
    if k < 1:
        raise ValueError("power_map needs k >= 1")
    return BiACMap(
        (0.0, 1.0),
        (0.0, 1.0),
        lambda x: x**k,
        lambda x: k * x ** (k - 1),
        lambda y: y ** (1.0 / k),
        lambda y: (1.0 / k) * y ** (1.0 / k - 1.0),
        inverse_exceptions=(0.0,) if k > 1 else (),
        label=f"x^{k:g}",
    )


def exp_map() -> BiACMap:
    """``(e**x - 1) / (e - 1)`` on ``[0, 1]``."""
    E = math.e - 1.0
    return BiACMap(
        (0.0, 1.0),
        (0.0, 1.0),
        lambda x: np.expm1(x) / E,
        lambda x: np.exp(x) / E,
        lambda y: np.log1p(E * y),
        lambda y: E / (1.0 + E * y),
        label="(exp(x)-1)/(e-1)",
    )


def piecewise_affine_map(knots: Sequence[tuple[float, float]] = ((0.0, 0.0), (0.25, 0.5), (1.0, 1.0))) -> BiACMap:
    """Increasing broken line through ``knots``; its interior knots are exceptions."""
    k = np.asarray(knots, dtype=np.float64)
    xs, ys = k[:, 0].copy(), k[:, 1].copy()
    if xs.size < 2 or np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise NotIncreasing("knots must increase in both coordinates")
    slopes = np.diff(ys) / np.diff(xs)

    def piece(t, edges):
        return np.clip(np.searchsorted(edges, t, side="right") - 1, 0, slopes.size - 1)

    return BiACMap(
        (xs[0], xs[-1]),
        (ys[0], ys[-1]),
        lambda x: np.interp(x, xs, ys),
        lambda x: slopes[piece(x, xs)],
        lambda y: np.interp(y, ys, xs),
        lambda y: 1.0 / slopes[piece(y, ys)],
        exceptions=tuple(xs[1:-1]),
        inverse_exceptions=tuple(ys[1:-1]),
        label="piecewise-affine",
    )


def reflect_map(cell=(0.0, 1.0)) -> BiACMap:
    """The decreasing map ``x -> lo + hi - x``."""
    cell = as_cell(cell)
    s = cell.lo + cell.hi
    neg = lambda x: -np.ones_like(x)  # noqa: E731
    return BiACMap(cell, cell, lambda x: s - x, neg, lambda y: s - y, neg, label="reflect")


def _bisect_inverse(fn, lo, hi, y, iters=64):
    """Vectorised bisection for an increasing ``fn`` on ``[lo, hi]``."""
    y = np.asarray(y, dtype=np.float64)
    a = np.full(y.shape, lo)
    b = np.full(y.shape, hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        below = fn(m) < y
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return 0.5 * (a + b)


def cantor_psi(stage: int = DEFAULT_STAGE) -> BiACMap:
    """``(x + C(x)) / 2`` with ``C`` the stage-``stage`` Cantor function.

    A strictly increasing homeomorphism of ``[0, 1]`` whose derivative is
    ``1/2`` almost everywhere: the rise carried by the Cantor set is
    invisible to the derivative, so the pack is not bi-AC and is flagged
    accordingly.  The derivatives given are the almost-everywhere values
    of the limit function.
    """
    fwd = lambda x: 0.5 * (x + cantor_function(x, stage))  # noqa: E731
    return BiACMap(
        (0.0, 1.0),
        (0.0, 1.0),
        fwd,
        lambda x: np.full(np.shape(x), 0.5),
        lambda y: _bisect_inverse(fwd, 0.0, 1.0, y),
        lambda y: np.full(np.shape(y), 2.0),
        claimed_biAC=False,
        label=f"cantor-psi[{stage}]",
    )


def compose(phi: BiACMap, rho: BiACMap) -> BiACMap:
    """``phi o rho`` (apply ``rho`` first); needs ``rho.codomain == phi.domain``."""
    if rho.codomain != phi.domain:
        raise DomainMismatch(f"cannot compose: {rho.codomain} != {phi.domain}")
    exc = set(rho.exceptions) | set(np.atleast_1d(rho.preimage(np.array(phi.exceptions))).tolist() if phi.exceptions else [])
    inv_exc = set(phi.inverse_exceptions) | (
        set(np.atleast_1d(phi._image(np.array(rho.inverse_exceptions))).tolist()) if rho.inverse_exceptions else set()
    )
    return BiACMap(
        rho.domain,
        phi.codomain,
        lambda x: phi.forward(rho.forward(x)),
        lambda x: phi.fderiv(rho.forward(x)) * rho.fderiv(x),
        lambda y: rho.inverse(phi.inverse(y)),
        lambda y: rho.ideriv(phi.inverse(y)) * phi.ideriv(y),
        exceptions=tuple(exc),
        inverse_exceptions=tuple(inv_exc),
        claimed_biAC=phi.claimed_biAC and rho.claimed_biAC,
        label=f"({phi.label})o({rho.label})",
    )


MAPS = {
    "identity": identity_map,
    "square": lambda: power_map(2),
    "cube": lambda: power_map(3),
    "exp": exp_map,
    "pwaffine": piecewise_affine_map,
    "reflect": reflect_map,
    "cantor": cantor_psi,
}


def named_map(name: str) -> BiACMap:
    try:
        return MAPS[name]()
    except KeyError:
        raise ValueError(f"unknown map {name!r}; choose from {sorted(MAPS)}") from None


# -- transport --------------------------------------------------------------


def _pullback(phi: BiACMap, f: Integrand, sigma: float, absolute: bool) -> Integrand:
    if f.cell != phi.codomain:
        raise DomainMismatch(f"integrand lives on {f.cell}, map codomain is {phi.codomain}")
    sing = set(phi.exceptions)
    if f.singular_points:
        sing |= set(np.atleast_1d(phi.preimage(np.array(f.singular_points))).tolist())
    exc = {}
    for p, v in f.null_exceptions.items():
        x = float(phi.preimage(p))
        if x in sing:
            continue
        d = float(phi.fderiv(x))
        exc[x] = sigma * v * (abs(d) if absolute else d)
    fwd, der, inner = phi.forward, phi.fderiv, f

    if absolute:
        fn = lambda x: sigma * inner(fwd(x)) * np.abs(der(x))  # noqa: E731
    else:
        fn = lambda x: sigma * inner(fwd(x)) * der(x)  # noqa: E731
    label = f"T[{phi.label},{sigma:+g}]({f.label})"
    return Integrand(fn, phi.domain, sorted(sing - set(exc)), exc, label=label)


def transport_apply(phi: BiACMap, sigma, f: Integrand) -> Integrand:
    """``x -> sigma * f(phi(x)) * phi'(x)`` on ``phi.domain``.

    The result is 0 at ``phi.exceptions`` and at preimages of ``f``'s
    singular points (declared singular there), and carries ``f``'s
    overridden values through to the corresponding preimages.
    """
    s = float(SignFlag.of(sigma).sigma)
    if not phi.increasing:
        raise NotIncreasing(f"{phi.label} is decreasing; transport is defined for increasing maps")
    return _pullback(phi, f, s, absolute=False)


@dataclass
class CheckReport:
    check: str
    pair: str
    lhs: float
    rhs: float
    discrepancy: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "pair": self.pair,
            "LHS": self.lhs,
            "RHS": self.rhs,
            "discrepancy": self.discrepancy,
            "threshold": self.threshold,
            "verdict": self.verdict,
            **self.details,
        }


def change_of_variable_check(
    phi: BiACMap,
    f: Integrand,
    tol: float = 1e-6,
    integration_tol: float | None = None,
    config: EngineConfig | None = None,
    rhs=None,
) -> CheckReport:
    """Compare the integral of ``(f o phi) |phi'|`` over the domain with that of ``f``.

    Works for decreasing maps too.  PASS iff ``|LHS - RHS| < tol * (1 + |RHS|)``;
    each side is integrated to ``integration_tol`` (default ``tol / 2``).
    A previously computed ``rhs`` result for ``f`` may be passed in.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    itol = tol / 2 if integration_tol is None else integration_tol
    g = _pullback(phi, f, 1.0, absolute=True)
    left = kh_integrate(g, tol=itol, config=config)
    right = kh_integrate(f, tol=itol, config=config) if rhs is None else rhs
    diff = abs(left.value - right.value)
    thr = tol * (1 + abs(right.value))
    return CheckReport(
        "change-of-variable",
        f"{phi.label} | {f.label}",
        left.value,
        right.value,
        diff,
        thr,
        diff < thr,
        {"lhs_error_estimate": left.error_estimate, "rhs_error_estimate": right.error_estimate},
    )


def change_of_variable_matrix(maps, integrands, tol: float = 1e-6, config: EngineConfig | None = None) -> list:
    """Every (map, integrand) pair; each right-hand side is integrated once."""
    out = []
    for f in integrands:
        rhs = kh_integrate(f, tol=tol / 2, config=config)
        for phi in maps:
            out.append(change_of_variable_check(phi, f, tol, config=config, rhs=rhs))
    return out


def _norm_budget(f: Integrand, tol: float, config) -> float:
    """Per-norm tolerance for a comparison passing at ``tol * (1 + ||f||_A)``.

    A cheap coarse norm gives a lower bound ``m`` for ``||f||_A``; each of
    the two norms then gets ``tol * (1 + m) / 2``, so their combined error
    stays under the threshold.
    """
    coarse = max(1e-3, tol)
    m = max(alexiewicz_norm(f, tol=coarse, config=config) - coarse, 0.0)
    return tol * (1.0 + m) / 2.0


def isometry_check(
    phi: BiACMap,
    sigma,
    f: Integrand,
    tol: float = 1e-6,
    norm_tol: float | None = None,
    config: EngineConfig | None = None,
    norm_f: float | None = None,
) -> CheckReport:
    """PASS iff ``| ||T f||_A - ||f||_A | < tol * (1 + ||f||_A)``.

    Each norm is computed to ``norm_tol``, by default half the threshold
    (with ``||f||_A`` bounded from below by a coarse pass).  A previously
    computed ``norm_f`` may be passed in; it must be accurate to ``norm_tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ntol = _norm_budget(f, tol, config) if norm_tol is None else norm_tol
    g = transport_apply(phi, sigma, f)
    n_t = alexiewicz_norm(g, tol=ntol, config=config)
    n_f = alexiewicz_norm(f, tol=ntol, config=config) if norm_f is None else norm_f
    diff = abs(n_t - n_f)
    thr = tol * (1 + n_f)
    return CheckReport(
        "isometry",
        f"{phi.label} sigma={SignFlag.of(sigma).sigma:+d} | {f.label}",
        n_t,
        n_f,
        diff,
        thr,
        diff < thr,
        {"norm_tol": ntol},
    )


def isometry_matrix(maps, integrands, sigmas=(1, -1), tol: float = 1e-6, config: EngineConfig | None = None) -> list:
    """Every (map, sign, integrand) triple; ``||f||_A`` is computed once per integrand."""
    out = []
    for f in integrands:
        ntol = _norm_budget(f, tol, config)
        n_f = alexiewicz_norm(f, tol=ntol, config=config)
        for phi in maps:
            for s in sigmas:
                out.append(isometry_check(phi, s, f, tol, norm_tol=ntol, config=config, norm_f=n_f))
    return out


def roundtrip_check(
    phi: BiACMap,
    sigma,
    g: Integrand,
    tol: float = 1e-6,
    config: EngineConfig | None = None,
) -> CheckReport:
    """Transport ``g`` by the inverse pack and back; PASS iff the difference has norm < ``tol``."""
    if g.cell != phi.domain:
        raise DomainMismatch(f"integrand lives on {g.cell}, map domain is {phi.domain}")
    there = transport_apply(phi.inverse_pack(), sigma, g)
    back = transport_apply(phi, sigma, there)
    diff = back - g
    n = alexiewicz_norm(diff, tol=tol / 2, config=config)
    return CheckReport(
        "roundtrip",
        f"{phi.label} sigma={SignFlag.of(sigma).sigma:+d} | {g.label}",
        n,
        0.0,
        n,
        tol,
        n < tol,
    )


# -- probes -----------------------------------------------------------------


@dataclass
class ProbeResult:
    value: float
    cells: list
    total_length: float

    def __float__(self):
        return self.value


def _extremal_cells(x, v):
    """Cells between consecutive local extrema of sampled values."""
    d = np.diff(v)
    s = np.sign(d)
    nz = np.flatnonzero(s != 0)
    if nz.size == 0:
        return np.empty(0), np.empty(0)
    turn = nz[1:][s[nz[1:]] != s[nz[:-1]]]
    idx = np.unique(np.concatenate([[0], turn, [x.size - 1]]))
    return x[idx[:-1]], x[idx[1:]]


def _pick(lo, hi, mass, delta):
    """Greedy by mass per length; total length stays below ``delta``."""
    length = hi - lo
    ok = (length > 0) & (length < delta) & (mass > 0)
    lo, hi, mass, length = lo[ok], hi[ok], mass[ok], length[ok]
    order = np.argsort(-mass / length, kind="stable")
    used = 0.0
    keep = []
    for k in order:
        if used + length[k] < delta:
            keep.append(k)
            used += length[k]
    keep = np.array(sorted(keep, key=lambda k: lo[k]), dtype=np.int64)
    return lo[keep], hi[keep], float(mass[keep].sum()), used


def _window_samples(F, a, b, n0, cap, rel):
    """Sample ``[a, b]`` uniformly, doubling until the sampled variation settles."""
    n = n0
    x = np.linspace(a, b, n)
    v = np.asarray(F(x))
    var = float(np.abs(np.diff(v)).sum())
    used = n
    while 2 * n <= cap:
        n2 = 2 * n - 1
        x2 = np.linspace(a, b, n2)
        v2 = np.asarray(F(x2))
        used += n2
        var2 = float(np.abs(np.diff(v2)).sum())
        x, v, n = x2, v2, n2
        if var2 <= var * (1 + rel):
            break
        var = var2
    return x, v, used


def ac_probe(
    F: AdditiveCellFn,
    delta: float,
    budget: int = 1 << 20,
    seed: int = 0,
    random_trials: int = 200,
    detail: bool = False,
):
    """Search for non-overlapping cells of total length < ``delta`` with large ``sum |F(J)|``.

    The heuristic samples ``F`` on dyadic windows shrinking towards both
    ends of the domain (oscillation concentrates there for the usual
    examples), refines each window while its sampled variation keeps
    growing, cuts the samples into cells between consecutive local
    extrema, and fills the length budget greedily by mass per length.  A
    randomised search over short cells runs as well.  The best sum found
    is a lower bound for the supremum over such families.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    D = F.domain
    L = D.length
    rng = np.random.default_rng(seed)
    levels = 40
    per_window = max(64, budget // (2 * levels + 1))
    xs = [np.linspace(D.lo, D.hi, min(per_window, 4097))]
    spent = xs[0].size
    for j in range(1, levels + 1):
        w_hi, w_lo = L * 2.0 ** -j, L * 2.0 ** -(j + 1)
        if w_lo < 1e-300 or spent >= budget:
            break
        for a, b in ((D.lo + w_lo, D.lo + w_hi), (D.hi - w_hi, D.hi - w_lo)):
            x, _, used = _window_samples(F, a, b, 64, min(per_window, budget - spent), 0.01)
            spent += used
            xs.append(x)
    x = np.unique(np.concatenate(xs + [[D.lo, D.hi]]))
    v = np.asarray(F(x))
    lo, hi = _extremal_cells(x, v)
    mass = np.abs(F.values(lo, hi)) if lo.size else np.empty(0)
    best_lo, best_hi, best, used = _pick(lo, hi, mass, delta)

    for _ in range(random_trials):
        m = int(rng.integers(1, 64))
        centres = np.sort(np.where(rng.random(m) < 0.5, D.lo + L * rng.random(m) ** 4, D.hi - L * rng.random(m) ** 4))
        widths = rng.random(m) * delta / m
        a = np.clip(centres - widths / 2, D.lo, D.hi)
        b = np.clip(centres + widths / 2, D.lo, D.hi)
        b = np.minimum(b, np.append(a[1:], D.hi))  # trim overlaps
        good = b > a
        a, b = a[good], b[good]
        if a.size == 0 or (b - a).sum() >= delta:
            continue
        s = float(np.abs(F.values(a, b)).sum())
        if s > best:
            best_lo, best_hi, best, used = a, b, s, float((b - a).sum())
    res = ProbeResult(best, list(zip(best_lo.tolist(), best_hi.tolist())), used)
    return res if detail else res.value


def luzin_probe(phi: BiACMap, cover: Iterable) -> tuple[float, float]:
    """Total length of ``cover`` and of its image cells ``[phi(lo), phi(hi)]``."""
    cells = [as_cell(c) for c in cover]
    for c in cells:
        if not phi.domain.contains_cell(c):
            raise DomainError(f"{c} not inside {phi.domain}")
    if not cells:
        return 0.0, 0.0
    lo = np.array([c.lo for c in cells])
    hi = np.array([c.hi for c in cells])
    img = np.abs(phi._image(hi) - phi._image(lo))
    return float((hi - lo).sum()), float(img.sum())


def zero_derivative_probe(
    phi: BiACMap, eps_schedule: Sequence[float] = (0.5, 0.1, 0.01, 0.001), grid: int | Sequence[float] = 100_000
) -> dict:
    """Grid estimate of the measure of ``{|phi'| < eps}`` for each ``eps``.

    An integer grid means that many equal cells, sampled at their midpoints,
    each counting its own length.
    """
    d = phi.domain
    if np.isscalar(grid):
        n = int(grid)
        x = d.lo + (np.arange(n) + 0.5) * (d.length / n)
        weight = np.full(n, d.length / n)
    else:
        x = np.sort(np.asarray(grid, dtype=np.float64))
        edges = np.concatenate([[d.lo], 0.5 * (x[1:] + x[:-1]), [d.hi]])
        weight = np.diff(edges)
    if phi.exceptions and np.any(np.isin(x, phi.exceptions)):
        raise DomainError("grid hits an exception of the map")
    der = np.abs(np.asarray(phi.fderiv(x)))
    return {
        "map": phi.label,
        "grid_points": int(x.size),
        "measure": {float(e): float(weight[der < e].sum()) for e in eps_schedule},
    }


__all__ = [
    "SignFlag",
    "BiACMap",
    "identity_map",
    "power_map",
    "exp_map",
    "piecewise_affine_map",
    "reflect_map",
    "cantor_psi",
    "compose",
    "MAPS",
    "named_map",
    "transport_apply",
    "CheckReport",
    "change_of_variable_check",
    "change_of_variable_matrix",
    "isometry_matrix",
    "isometry_check",
    "roundtrip_check",
    "ProbeResult",
    "ac_probe",
    "luzin_probe",
    "zero_derivative_probe",
]
