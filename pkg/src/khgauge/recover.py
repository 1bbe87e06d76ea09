"""Recover the sign and the map behind an operator that looks like a transport.

For ``T = T_phi`` with sign ``sigma`` the indefinite integral of ``T(1)`` is
``sigma * (phi(x) - lo)`` where ``lo`` is the left end of the codomain, so a
single application of ``T`` determines both.  ``verify_recovery`` rebuilds a
map pack from the sampled ``phi`` and compares ``T`` with the transport by
that pack on a set of probe integrands, in the Alexiewicz norm.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .cells import AdditiveCellFn, Cell, as_cell
from .errors import DegenerateOperator, DomainError, DomainMismatch, EndpointMismatch, NotIncreasing
from .indefinite import alexiewicz_norm, indefinite_integral
from .integrate import EngineConfig, Integrand, constant
from .library import ident, one, sin2pi
from .transport import BiACMap, SignFlag, _bisect_inverse, ac_probe, transport_apply

log = logging.getLogger(__name__)


@dataclass
class BlackBoxOperator:
    """A map from integrands on ``codomain_cell`` to integrands on ``domain_cell``.

    ``apply`` is expected to be pure.  If it is not safe to call from
    several threads, wrap the operator with :meth:`serialized`.
    """

    apply_fn: Callable[[Integrand], Integrand]
    domain_cell: Cell
    codomain_cell: Cell
    label: str = "T"

    def __post_init__(self):
        self.domain_cell = as_cell(self.domain_cell)
        self.codomain_cell = as_cell(self.codomain_cell)

    def apply(self, f: Integrand) -> Integrand:
        if f.cell != self.codomain_cell:
            raise DomainMismatch(f"{self.label} takes integrands on {self.codomain_cell}, got {f.cell}")
        g = self.apply_fn(f)
        if g.cell != self.domain_cell:
            raise DomainMismatch(f"{self.label} returned an integrand on {g.cell}, expected {self.domain_cell}")
        return g

    __call__ = apply

    def serialized(self) -> "BlackBoxOperator":
        lock = threading.Lock()
        inner = self.apply_fn

        def locked(f):
            with lock:
                return inner(f)

        return BlackBoxOperator(locked, self.domain_cell, self.codomain_cell, self.label)

    def linearity_defect(self, f: Integrand, g: Integrand, tol: float = 1e-6, config=None) -> float:
        """``||T(f + g) - T(f) - T(g)||_A``."""
        diff = self.apply(f + g) - self.apply(f) - self.apply(g)
        return alexiewicz_norm(diff, tol=tol, config=config)


def transport_operator(phi: BiACMap, sigma=1) -> BlackBoxOperator:
    s = SignFlag.of(sigma)
    return BlackBoxOperator(
        lambda f: transport_apply(phi, s, f),
        phi.domain,
        phi.codomain,
        label=f"T[{phi.label},{s.sigma:+d}]",
    )


def perturbed_operator(T: BlackBoxOperator, g0: Integrand) -> BlackBoxOperator:
    """``f -> T(f) + g0``.  Not linear; used as a negative control."""
    if g0.cell != T.domain_cell:
        raise DomainMismatch(f"perturbation lives on {g0.cell}, operator domain is {T.domain_cell}")
    return BlackBoxOperator(lambda f: T.apply_fn(f) + g0, T.domain_cell, T.codomain_cell, f"{T.label}+{g0.label}")


@dataclass(frozen=True)
class MapSamples:
    """A recovered map known on a grid, with the anchors where its slope may jump."""

    grid: np.ndarray
    values: np.ndarray
    domain: Cell
    codomain: Cell
    breakpoints: tuple = ()
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != values.shape:
            raise DomainError("grid and values must be 1-D of equal length >= 2")
        if not np.all(np.diff(grid) > 0):
            raise DomainError("grid must be strictly increasing")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "domain", as_cell(self.domain))
        object.__setattr__(self, "codomain", as_cell(self.codomain))
        object.__setattr__(self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints)))

    def max_error(self, phi: Callable) -> float:
        """Largest deviation from a reference map on the grid."""
        return float(np.max(np.abs(self.values - np.asarray(phi(self.grid)))))

    def to_csv(self, path_or_file, header: str = "x,phi") -> None:
        np.savetxt(
            path_or_file,
            np.column_stack([self.grid, self.values]),
            delimiter=",",
            header=header,
            comments="",
            fmt="%.17g",
        )


def _degenerate_threshold(tol: float, codomain: Cell) -> float:
    return max(100.0 * tol, 1e-12 * codomain.length)


def recover_sigma_phi(
    T: BlackBoxOperator,
    grid=257,
    tol: float = 1e-8,
    config: EngineConfig | None = None,
) -> tuple[SignFlag, MapSamples]:
    """Sign and sampled map from the indefinite integral of ``T(1)``."""
    lo_c = T.codomain_cell.lo
    t1 = T.apply(constant(1.0, T.codomain_cell))
    u = indefinite_integral(t1, T.domain_cell, grid, tol, config)
    end = float(u.values[-1])
    if abs(end) <= _degenerate_threshold(tol, T.codomain_cell):
        raise DegenerateOperator(f"T(1) integrates to {end:.3g} over {T.domain_cell}")
    s = SignFlag(1 if end > 0 else -1)
    values = lo_c + s.sigma * u.values
    inner = tuple(p for p in t1.special_points if T.domain_cell.lo < p < T.domain_cell.hi)
    meta = {"u_end": end, "error_estimate": u.meta.get("error_estimate"), "tol": tol}
    return s, MapSamples(u.grid, values, T.domain_cell, T.codomain_cell, inner, meta)


# -- rebuilding a map pack ----------------------------------------------------


class _PiecewisePchip:
    """Monotone cubic interpolation restarted at each breakpoint."""

    def __init__(self, x, y, breakpoints):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.edges = np.array([x[0], *[b for b in breakpoints if x[0] < b < x[-1]], x[-1]])
        self.pieces = []
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            sel = (x >= a) & (x <= b)
            self.pieces.append(PchipInterpolator(x[sel], y[sel], extrapolate=True))

    def _piece_index(self, t):
        return np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.pieces) - 1)

    def __call__(self, t, nu=0):
        t = np.asarray(t, dtype=np.float64)
        flat = np.atleast_1d(t).ravel()
        out = np.empty(flat.shape)
        k = self._piece_index(flat)
        for j, p in enumerate(self.pieces):
            sel = k == j
            if np.any(sel):
                out[sel] = p(flat[sel], nu)
        return out.reshape(t.shape) if t.ndim else float(out[0])


def map_from_samples(samples: MapSamples, label: str = "phi_hat") -> BiACMap:
    """Map pack through the samples.

    The map is increasing piecewise-cubic (monotone interpolation on each
    stretch between breakpoints), its derivative comes from the same
    cubics, the inverse is found by bisection and the breakpoints are the
    exceptions.  Raises ``NotIncreasing`` or ``EndpointMismatch`` if the
    samples cannot describe an increasing homeomorphism onto the codomain.
    """
    x, y = samples.grid, samples.values.copy()
    c = samples.codomain
    if not np.all(np.diff(y) > 0):
        bad = int(np.argmin(np.diff(y)))
        raise NotIncreasing(f"samples do not increase near x={x[bad]:.6g}")
    # the samples carry the integration error of the curve they came from
    slack = max(1e-9 * max(1.0, c.length), 10.0 * samples.meta.get("tol", 0.0))
    if abs(y[0] - c.lo) > slack or abs(y[-1] - c.hi) > slack:
        raise EndpointMismatch(f"samples run from {y[0]:.12g} to {y[-1]:.12g}, codomain is {c}")
    y[0], y[-1] = c.lo, c.hi
    interp = _PiecewisePchip(x, y, samples.breakpoints)
    d = samples.domain
    fwd = lambda t: np.clip(interp(t), c.lo, c.hi)  # noqa: E731
    der = lambda t: interp(t, 1)  # noqa: E731
    inv = lambda v: _bisect_inverse(fwd, d.lo, d.hi, v)  # noqa: E731
    breaks = [b for b in samples.breakpoints if d.lo < b < d.hi]
    y_breaks = tuple(float(interp(b)) for b in breaks)
    return BiACMap(
        d,
        c,
        fwd,
        der,
        inv,
        lambda v: 1.0 / interp(inv(v), 1),
        exceptions=tuple(breaks),
        inverse_exceptions=y_breaks,
        label=label,
    )


# -- verification ------------------------------------------------------------


def default_probes(cell=(0.0, 1.0)) -> list:
    return [one(cell), ident(cell), sin2pi(cell)]


@dataclass
class ProbeOutcome:
    probe: str
    transport_defect: float | None
    threshold: float
    norm_f: float
    norm_Tf: float
    passed: bool

    @property
    def isometry_defect(self) -> float:
        return abs(self.norm_Tf - self.norm_f)

    def as_dict(self) -> dict:
        return {
            "probe": self.probe,
            "transport_defect": self.transport_defect,
            "isometry_defect": self.isometry_defect,
            "threshold": self.threshold,
            "norm_f": self.norm_f,
            "norm_Tf": self.norm_Tf,
            "verdict": "PASS" if self.passed else "FAIL",
        }


@dataclass
class RecoveryReport:
    sigma: int
    passed: bool
    probes: list
    reasons: list
    endpoint_defect: float
    ac_sums: dict = field(default_factory=dict)
    phi_hat: BiACMap | None = field(default=None, repr=False)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def worst_defect(self) -> float:
        """Largest transport defect over probes (or the isometry defect if no map was built)."""
        vals = [p.transport_defect if p.transport_defect is not None else p.isometry_defect for p in self.probes]
        return max(vals + [self.endpoint_defect]) if vals else self.endpoint_defect

    def as_dict(self) -> dict:
        return {
            "check": "recovery",
            "sigma": self.sigma,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "endpoint_defect": self.endpoint_defect,
            "worst_defect": self.worst_defect,
            "ac_sums": dict(self.ac_sums),
            "probes": [p.as_dict() for p in self.probes],
        }


def verify_recovery(
    T: BlackBoxOperator,
    sigma,
    phi_curve: MapSamples,
    probe_set: Sequence[Integrand] | None = None,
    tol: float = 1e-6,
    config: EngineConfig | None = None,
    ac_delta: float = 0.01,
    ac_threshold: float = 0.5,
    ac_budget: int = 1 << 14,
    strict: bool = False,
) -> RecoveryReport:
    """Does ``T`` act as transport by the recovered map on every probe?

    A probe ``f`` passes iff ``||T f - T_hat f||_A < tol * (1 + ||f||_A)``.
    If the samples are not increasing or miss the codomain endpoints the
    verdict is FAIL straight away (or the error is raised when ``strict``);
    the norms ``||T f||_A`` are still reported so the isometry defect is
    visible.  ``ac_probe`` runs on the rebuilt map and its inverse with cell
    budget ``ac_delta``; a sum reaching ``ac_threshold`` fails the check,
    a smaller one proves nothing.
    """
    s = SignFlag.of(sigma)
    probes = default_probes(T.codomain_cell) if probe_set is None else list(probe_set)
    ntol = tol / 2
    reasons = []
    c = T.codomain_cell
    endpoint_defect = max(abs(phi_curve.values[0] - c.lo), abs(phi_curve.values[-1] - c.hi))
    phi_hat = None
    try:
        phi_hat = map_from_samples(phi_curve)
    except (NotIncreasing, EndpointMismatch) as exc:
        if strict:
            raise
        reasons.append(f"{type(exc).__name__}: {exc}")

    outcomes = []
    for f in probes:
        tf = T.apply(f)
        n_f = alexiewicz_norm(f, tol=ntol, config=config)
        n_tf = alexiewicz_norm(tf, tol=ntol, config=config)
        thr = tol * (1.0 + n_f)
        defect = None
        if phi_hat is not None:
            defect = alexiewicz_norm(tf - transport_apply(phi_hat, s, f), tol=ntol, config=config)
        ok = defect is not None and defect < thr
        if defect is not None and not ok:
            reasons.append(f"probe {f.label}: defect {defect:.3g} >= {thr:.3g}")
        outcomes.append(ProbeOutcome(f.label, defect, thr, n_f, n_tf, ok))

    ac_sums = {}
    if phi_hat is not None:
        inv = phi_hat.inverse_pack()
        for name, m in (("phi", phi_hat), ("phi_inverse", inv)):
            val = ac_probe(AdditiveCellFn(m.forward, m.domain), ac_delta, budget=ac_budget, random_trials=50)
            ac_sums[name] = val
            if val >= ac_threshold:
                reasons.append(f"ac_probe on {name}: sum {val:.3g} over cells of length < {ac_delta:g}")
    passed = phi_hat is not None and not reasons
    rep = RecoveryReport(s.sigma, passed, outcomes, reasons, float(endpoint_defect), ac_sums, phi_hat)
    log.info("recovery %s: %s", rep.verdict, "; ".join(reasons) if reasons else "all probes agree")
    return rep


__all__ = [
    "BlackBoxOperator",
    "transport_operator",
    "perturbed_operator",
    "MapSamples",
    "recover_sigma_phi",
    "map_from_samples",
    "default_probes",
    "ProbeOutcome",
    "RecoveryReport",
    "verify_recovery",
]
