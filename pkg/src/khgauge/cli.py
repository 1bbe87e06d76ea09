"""Command line front end.

Every subcommand prints one JSON object on stdout and a short human
summary on stderr.  Exit status: 0 success or PASS, 1 a check FAILed,
2 bad usage or input, 3 numerical failure (no convergence, depth cap,
non-finite samples).

Settings come from three layers, later ones winning: built-in defaults, a
TOML file (``--config`` or the ``KHGAUGE_CONFIG`` environment variable) with
flat keys named like the long options (``tol = 1e-6``, ``cell = [0, 1]``),
and the command line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np
import tomli

from . import __version__
from .covering import besicovitch_decompose, families_as_json, verify_decomposition
from .cantor import cantor_stage_cover
from .cells import AdditiveCellFn, Cell, as_cell
from .dsl import VARIABLES, compile_expr, free_variables, parse, to_text
from .errors import DegenerateOperator, KHError, NumericalFailure
from .indefinite import alexiewicz_norm, indefinite_integral
from .integrate import EngineConfig, Integrand, kh_integrate
from .library import INTEGRANDS, named_integrand
from .recover import perturbed_operator, recover_sigma_phi, transport_operator, verify_recovery
from .transport import (
    MAPS,
    BiACMap,
    SignFlag,
    change_of_variable_check,
    change_of_variable_matrix,
    compose,
    isometry_check,
    luzin_probe,
    named_map,
    roundtrip_check,
    transport_apply,
    ac_probe,
)

log = logging.getLogger("khgauge")

CONFIG_ENV = "KHGAUGE_CONFIG"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "cell": [0.0, 1.0],
    "tol": 1e-6,
    "grid": 65,
    "policy": "gauss10",
    "alt_policy": "gauss8",
    "depth_cap": 60,
    "max_levels": 40,
    "sigma": 1,
    "threads": os.cpu_count() or 1,
    "delta": 0.01,
    "budget": 1 << 20,
    "seed": 0,
    "max_families": 5,
}

# forward expressions of the built-in maps, so that e.g. --phi "x^2" finds the pack
_MAP_TEXT = {
    "x": "identity",
    "x^2": "square",
    "x^3": "cube",
    "(exp(x) - 1) / (e - 1)": "exp",
}


class UsageError(KHError):
    pass


# -- building inputs -----------------------------------------------------------


def _cell(spec, key="cell") -> Cell:
    v = spec.get(key)
    if v is None:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    if len(v) != 2:
        raise UsageError(f"{key} needs two numbers")
    return as_cell(tuple(float(t) for t in v))


def _expr_fn(text: str, what: str):
    e = parse(text)
    used = free_variables(e)
    if len(used) > 1:
        raise UsageError(f"{what} mixes variables {sorted(used)}; use one of {VARIABLES}")
    return compile_expr(e), to_text(e)


def build_integrand(spec, key="f", cell_key="cell") -> Integrand:
    text = spec.get(key)
    if text is None:
        raise UsageError(f"--{key} is required")
    cell = _cell(spec, cell_key)
    if text in INTEGRANDS and text not in VARIABLES:
        base = named_integrand(text, cell)
        sing = set(base.singular_points) | {float(p) for p in spec.get("singular") or ()}
        return Integrand(base.fn, cell, sorted(sing), _exceptions(spec), label=base.label)
    fn, label = _expr_fn(text, key)
    return Integrand(fn, cell, [float(p) for p in spec.get("singular") or ()], _exceptions(spec), label=label)


def _exceptions(spec) -> dict:
    out = {}
    for item in spec.get("exception") or ():
        if len(item) != 2:
            raise UsageError("each exception is a point and a value")
        out[float(item[0])] = float(item[1])
    return out


def _lookup_map(text: str):
    if text in MAPS:
        return named_map(text)
    try:
        canon = to_text(parse(text))
    except KHError:
        return None
    return named_map(_MAP_TEXT[canon]) if canon in _MAP_TEXT else None


def build_map(spec) -> BiACMap:
    names = spec.get("compose")
    if names:
        maps = [named_map(n) for n in names]
        phi = maps[0]
        for rho in maps[1:]:
            phi = compose(phi, rho)
        return phi
    text = spec.get("phi")
    if text is None:
        raise UsageError("--phi (or --compose) is required")
    known = _lookup_map(text)
    if known is not None and not spec.get("dphi"):
        if spec.get("cell") is not None and as_cell(tuple(spec["cell"])) != known.domain:
            raise UsageError(f"map {known.label} lives on {known.domain}")
        return known
    missing = [k for k in ("dphi", "phi_inv", "dphi_inv") if not spec.get(k)]
    if missing:
        raise UsageError(
            f"{text!r} is not a built-in map ({', '.join(sorted(MAPS))}); "
            f"give --{' --'.join(m.replace('_', '-') for m in missing)} as well"
        )
    dom = _cell(spec)
    cod = as_cell(tuple(spec["codomain"])) if spec.get("codomain") else dom
    fwd, label = _expr_fn(text, "phi")
    return BiACMap(
        dom,
        cod,
        fwd,
        _expr_fn(spec["dphi"], "dphi")[0],
        _expr_fn(spec["phi_inv"], "phi-inv")[0],
        _expr_fn(spec["dphi_inv"], "dphi-inv")[0],
        exceptions=tuple(float(p) for p in spec.get("map_exceptions") or ()),
        label=label,
    )


def _config(spec) -> EngineConfig:
    return EngineConfig.from_policies(
        spec["policy"], spec["alt_policy"], depth_cap=int(spec["depth_cap"]), max_levels=int(spec["max_levels"])
    )


def _codomain_spec(spec, phi: BiACMap) -> dict:
    s = dict(spec)
    s["cell"] = [phi.codomain.lo, phi.codomain.hi]
    return s


# -- subcommands ---------------------------------------------------------------


def cmd_integrate(spec):
    f = build_integrand(spec)
    r = kh_integrate(f, tol=spec["tol"], config=_config(spec))
    d = r.as_dict()
    summary = f"integral of {f.label} over {f.cell} = {r.value:.12g} (error estimate {r.error_estimate:.2g})"
    return d, summary, EXIT_OK


def cmd_norm(spec):
    f = build_integrand(spec)
    tol = spec["tol"]
    r = alexiewicz_norm(f, tol=tol, grid_spec=spec["grid"], config=_config(spec), detail=True)
    last_move = abs(r.history[-1] - r.history[-2]) if len(r.history) > 1 else 0.0
    d = {"value": r.value, "error_estimate": last_move + tol / 2, "argmax": r.argmax, "rounds": r.rounds}
    return d, f"Alexiewicz norm of {f.label} = {r.value:.12g}, attained near x = {r.argmax:.6g}", EXIT_OK


def cmd_indefinite(spec):
    f = build_integrand(spec)
    c = indefinite_integral(f, grid_spec=spec["grid"], tol=spec["tol"], config=_config(spec))
    if spec.get("out"):
        c.to_csv(spec["out"])
    d = {
        "value": float(c.values[-1]),
        "error_estimate": c.meta["error_estimate"],
        "grid": c.grid.tolist(),
        "F": c.values.tolist(),
    }
    return d, f"indefinite integral of {f.label} on {len(c)} points; F(hi) = {c.values[-1]:.12g}", EXIT_OK


def cmd_transport(spec):
    phi = build_map(spec)
    f = build_integrand(_codomain_spec(spec, phi))
    s = SignFlag.of(spec["sigma"])
    g = transport_apply(phi, s, f)
    r = kh_integrate(g, tol=spec["tol"], config=_config(spec))
    at = [float(x) for x in spec.get("at") or ()]
    d = {
        "value": r.value,
        "error_estimate": r.error_estimate,
        "samples": {repr(x): float(np.asarray(g(np.array([x])))[0]) for x in at},
    }
    if spec.get("out"):
        indefinite_integral(g, grid_spec=spec["grid"], tol=spec["tol"], config=_config(spec)).to_csv(spec["out"])
    return d, f"{g.label}: integral over {g.cell} = {r.value:.12g}", EXIT_OK


def _report_exit(reports):
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _bi_ac_matrix():
    maps = [named_map(n) for n in ("identity", "square", "cube", "exp", "pwaffine")]
    fs = [named_integrand(n) for n in ("one", "y", "sin2pi", "invsqrt", "flagship")]
    return maps, fs


def cmd_check_cov(spec):
    cfg = _config(spec)
    if spec.get("matrix"):
        maps, fs = _bi_ac_matrix()
        reps = change_of_variable_matrix(maps, fs, spec["tol"], config=cfg)
        worst = max(r.discrepancy / (1 + abs(r.rhs)) for r in reps)
        bad = [r.pair for r in reps if not r.passed]
        d = {"value": worst, "error_estimate": None, "verdict": "FAIL" if bad else "PASS", "pairs": [r.as_dict() for r in reps]}
        summary = f"change of variable on {len(reps)} pairs: {'FAIL ' + ', '.join(bad) if bad else 'all PASS'}"
        return d, summary, _report_exit(reps)
    phi = build_map(spec)
    f = build_integrand(_codomain_spec(spec, phi))
    r = change_of_variable_check(phi, f, spec["tol"], config=cfg)
    d = {"value": r.discrepancy, "error_estimate": r.details["lhs_error_estimate"] + r.details["rhs_error_estimate"], **r.as_dict()}
    return d, f"{r.verdict}: LHS {r.lhs:.12g} RHS {r.rhs:.12g} discrepancy {r.discrepancy:.2g}", _report_exit([r])


def cmd_check_isometry(spec):
    phi = build_map(spec)
    f = build_integrand(_codomain_spec(spec, phi))
    r = isometry_check(phi, spec["sigma"], f, spec["tol"], config=_config(spec))
    d = {"value": r.discrepancy, "error_estimate": spec["tol"] / 2, **r.as_dict()}
    return d, f"{r.verdict}: |T f|_A = {r.lhs:.12g}, |f|_A = {r.rhs:.12g}", _report_exit([r])


def cmd_roundtrip(spec):
    phi = build_map(spec)
    s = dict(spec)
    s["cell"] = [phi.domain.lo, phi.domain.hi]
    g = build_integrand(s)
    r = roundtrip_check(phi, spec["sigma"], g, spec["tol"], config=_config(spec))
    d = {"value": r.discrepancy, "error_estimate": spec["tol"] / 2, **r.as_dict()}
    return d, f"{r.verdict}: norm of round-trip difference {r.discrepancy:.3g}", _report_exit([r])


def cmd_recover(spec):
    phi = build_map(spec)
    T = transport_operator(phi, spec["sigma"])
    if spec.get("perturb"):
        s = dict(spec)
        s["cell"] = [phi.domain.lo, phi.domain.hi]
        s["singular"], s["exception"] = (), ()
        T = perturbed_operator(T, build_integrand(s, key="perturb"))
    grid = spec["grid"] if spec.get("grid_set") else 257
    cfg = _config(spec)
    try:
        sigma, curve = recover_sigma_phi(T, grid=grid, tol=min(spec["tol"], 1e-8), config=cfg)
    except DegenerateOperator as exc:
        d = {"value": None, "error_estimate": None, "verdict": "FAIL", "reason": str(exc)}
        return d, f"FAIL: {exc}", EXIT_FAIL
    if spec.get("out"):
        curve.to_csv(spec["out"], header="x,F")
    d = {
        "value": sigma.sigma,
        "error_estimate": curve.meta.get("error_estimate"),
        "sigma": sigma.sigma,
        "grid": curve.grid.tolist(),
        "phi": curve.values.tolist(),
    }
    code = EXIT_OK
    summary = f"recovered sigma = {sigma.sigma:+d} and phi on {curve.grid.size} points"
    if not spec.get("no_verify"):
        rep = verify_recovery(T, sigma, curve, tol=spec["tol"], config=cfg)
        d["verification"] = rep.as_dict()
        d["verdict"] = rep.verdict
        summary += f"; verification {rep.verdict}"
        if rep.reasons:
            summary += " (" + "; ".join(rep.reasons) + ")"
        code = EXIT_OK if rep.passed else EXIT_FAIL
    return d, summary, code


def cmd_besicovitch(spec):
    if spec.get("random"):
        rng = np.random.default_rng(int(spec["seed"]))
        n = int(spec["random"])
        pts = rng.random(n)
        radii = rng.random(n) * 0.1 + 1e-6
    else:
        pts = [float(p) for p in spec.get("points") or ()]
        radii = [float(r) for r in spec.get("radii") or ()]
        if not pts or not radii:
            raise UsageError("give --points and --radii, or --random N")
    fams = besicovitch_decompose(pts, radii, max_families=int(spec["max_families"]))
    audit = verify_decomposition(pts, radii, fams) if len(pts) <= 512 else None
    d = {"value": len(fams), "error_estimate": None, "families": families_as_json(fams)}
    if audit is not None:
        d["audit"] = {
            "ok": audit["ok"],
            "uncovered": len(audit["uncovered"]),
            "clashes": len(audit["clashes"]),
            "selected": audit["selected"],
        }
    ok = audit is None or audit["ok"]
    return d, f"{len(fams)} families cover {len(pts)} points{'' if ok else ' (audit FAILED)'}", EXIT_OK if ok else EXIT_FAIL


def cmd_ac_probe(spec):
    text = spec.get("F") or spec.get("f")
    if text is None:
        raise UsageError("--F is required (point function)")
    raw, label = _expr_fn(text, "F")
    overrides = _exceptions(spec)
    cell = _cell(spec)

    def fn(x):
        y = np.array(raw(x), dtype=np.float64)
        for p, v in overrides.items():
            y[np.asarray(x) == p] = v
        return y

    ends = fn(np.array([cell.lo, cell.hi]))
    if not np.all(np.isfinite(ends)):
        raise UsageError(f"F is not finite at an end of {cell}; set its value with --exception P V")
    F = AdditiveCellFn(fn, cell)
    r = ac_probe(F, float(spec["delta"]), budget=int(spec["budget"]), seed=int(spec["seed"]), detail=True)
    d = {"value": r.value, "error_estimate": None, "total_length": r.total_length, "cells": r.cells}
    return d, f"best sum |F(J)| = {r.value:.6g} over {len(r.cells)} cells of total length {r.total_length:.3g} ({label})", EXIT_OK


def cmd_luzin_probe(spec):
    phi = build_map(spec)
    if spec.get("cantor_stage") is not None:
        lo, hi = cantor_stage_cover(int(spec["cantor_stage"]))
        cover = list(zip(lo.tolist(), hi.tolist()))
    else:
        cover = [tuple(c) for c in spec.get("cover") or ()]
        if not cover:
            raise UsageError("give --cover A B (repeatable) or --cantor-stage N")
    total, image = luzin_probe(phi, cover)
    d = {"value": image, "error_estimate": None, "cover_length": total, "image_length": image, "cells": len(cover)}
    return d, f"cover of length {total:.6g} maps to cells of total length {image:.6g}", EXIT_OK


COMMANDS = {
    "integrate": (cmd_integrate, "KH integral of an integrand over a cell"),
    "norm": (cmd_norm, "Alexiewicz norm"),
    "indefinite": (cmd_indefinite, "indefinite integral on a grid (CSV with --out)"),
    "transport": (cmd_transport, "transport an integrand by a map"),
    "check-cov": (cmd_check_cov, "change-of-variable check"),
    "check-isometry": (cmd_check_isometry, "norm preservation under transport"),
    "roundtrip": (cmd_roundtrip, "transport by the inverse and back"),
    "recover": (cmd_recover, "recover sign and map from a transport-like operator"),
    "besicovitch": (cmd_besicovitch, "split a centered-interval cover into disjoint families"),
    "ac-probe": (cmd_ac_probe, "search for cells of small length and large mass"),
    "luzin-probe": (cmd_luzin_probe, "image length of a cover under a map"),
}


# -- argument parsing ----------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help=f"TOML file with default settings (else ${CONFIG_ENV})")
    p.add_argument("--tol", type=float)
    p.add_argument("--threads", type=int, help="accepted for compatibility; the engine runs on one thread")
    p.add_argument("--policy", help="primary tag policy (gaussN)")
    p.add_argument("--alt-policy", help="alternate tag policy (gaussN)")
    p.add_argument("--depth-cap", type=int)
    p.add_argument("--max-levels", type=int)
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_integrand(p, key="f"):
    p.add_argument("--cell", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument(f"--{key}", help="expression in x (or y), or a library name: " + ", ".join(sorted(INTEGRANDS)))
    p.add_argument("--singular", nargs="+", type=float, metavar="P", help="declared singular points")
    p.add_argument("--exception", nargs=2, type=float, action="append", metavar=("P", "V"), help="override f(P) = V")


def _add_map(p):
    p.add_argument("--phi", help="built-in map name (" + ", ".join(sorted(MAPS)) + ") or forward expression")
    p.add_argument("--dphi", help="derivative expression")
    p.add_argument("--phi-inv", help="inverse expression")
    p.add_argument("--dphi-inv", help="derivative of the inverse")
    p.add_argument("--codomain", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument("--map-exceptions", nargs="+", type=float, metavar="P")
    p.add_argument("--compose", nargs="+", metavar="NAME", help="built-in maps composed left to right (outermost first)")
    p.add_argument("--sigma", type=float, choices=(-1.0, 1.0))


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="khgauge", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    ps = {}
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        _add_common(p)
        ps[name] = p
    for name in ("integrate", "norm", "indefinite"):
        _add_integrand(ps[name])
    for name in ("norm", "indefinite", "transport", "recover"):
        ps[name].add_argument("--grid", type=int)
    for name in ("indefinite", "transport", "recover"):
        ps[name].add_argument("--out", help="CSV output path")
    for name in ("transport", "check-cov", "check-isometry", "roundtrip", "recover", "luzin-probe"):
        _add_map(ps[name])
    for name in ("transport", "check-cov", "check-isometry"):
        _add_integrand(ps[name])
    _add_integrand(ps["roundtrip"])
    ps["roundtrip"].add_argument("--g", dest="f", help="integrand on the map's domain (same as --f)")
    ps["transport"].add_argument("--at", nargs="+", type=float, metavar="X", help="report T f at these points")
    ps["check-cov"].add_argument("--matrix", action="store_true", default=None, help="run the built-in 5x5 matrix")
    ps["recover"].add_argument("--perturb", help="expression added to every output of the operator")
    ps["recover"].add_argument("--no-verify", action="store_true", default=None)
    ps["recover"].add_argument("--cell", nargs=2, type=float, metavar=("A", "B"))
    b = ps["besicovitch"]
    b.add_argument("--points", nargs="+", type=float)
    b.add_argument("--radii", nargs="+", type=float, help="one radius for all points or one per point")
    b.add_argument("--random", type=int, metavar="N", help="random instance with N points")
    b.add_argument("--seed", type=int)
    b.add_argument("--max-families", type=int)
    a = ps["ac-probe"]
    a.add_argument("--cell", nargs=2, type=float, metavar=("A", "B"))
    a.add_argument("--F", help="point function expression")
    a.add_argument("--exception", nargs=2, type=float, action="append", metavar=("P", "V"), help="set F(P) = V")
    a.add_argument("--delta", type=float)
    a.add_argument("--budget", type=int)
    a.add_argument("--seed", type=int)
    ps["luzin-probe"].add_argument("--cell", nargs=2, type=float, metavar=("A", "B"))
    ps["luzin-probe"].add_argument("--cover", nargs=2, type=float, action="append", metavar=("A", "B"))
    ps["luzin-probe"].add_argument("--cantor-stage", type=int)
    return parser


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags that were actually given."""
    spec = dict(DEFAULTS)
    path = ns.config or os.environ.get(CONFIG_ENV)
    if path:
        spec.update(load_config(path))
    given = {k: v for k, v in vars(ns).items() if v is not None and k not in ("config", "verbose", "command")}
    if "grid" in given or "grid" in spec and spec["grid"] != DEFAULTS["grid"]:
        spec["grid_set"] = True
    spec.update(given)
    spec["config_file"] = path
    if "f" not in spec and "integrand" in spec:
        spec["f"] = spec.pop("integrand")
    tol = float(spec["tol"])
    if not (tol > 0 and math.isfinite(tol)):
        raise UsageError("tol must be a positive number")
    spec["tol"] = tol
    return spec


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _emit(command, spec, payload, out=None):
    out = out or sys.stdout
    doc = {
        "command": command,
        **payload,
        "config_echo": {k: v for k, v in spec.items() if k != "grid_set"},
        "engine_version": __version__,
    }
    out.write(json.dumps(_jsonable(doc)) + "\n")
    out.flush()


def main(argv=None) -> int:
    parser = make_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(ns.verbose, 2), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    command = ns.command
    handler = COMMANDS[command][0]
    try:
        spec = resolve(ns)
        payload, summary, code = handler(spec)
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        err = {"value": getattr(exc, "best", None), "error_estimate": getattr(exc, "error_estimate", None)}
        _emit(command, locals().get("spec", {}), {**err, "error": type(exc).__name__, "message": str(exc)})
        return EXIT_NUMERIC
    except (KHError, ValueError, OSError, tomli.TOMLDecodeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(command, spec, payload)
    print(summary, file=sys.stderr)
    return code


def run() -> None:
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


__all__ = ["main", "run", "make_parser", "resolve", "build_integrand", "build_map", "load_config"]
