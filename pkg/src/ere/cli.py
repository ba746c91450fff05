"""Command-line front end: ``ere index|collision|sweep|trace-curves|verify``."""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
from typing import Iterable, Optional, Sequence

import numpy as np

from . import collision as col
from .errors import DomainError, EREError, ProbeFailure
from .flow import DEFAULT_ATOL, DEFAULT_RTOL, classify, fundamental_for
from .maslov import index_pm1
from .models import build_config
from .stability import (
    SWEEP_COLUMNS,
    default_jobs,
    morse_indices,
    ordering_holds,
    small_large,
    sweep,
    trace_degenerate_curves,
)
from .symplectic import dirichlet, neumann

COMMANDS = ("index", "collision", "sweep", "trace-curves", "verify")


# ---------------------------------------------------------------------------
# formatting


def fmt(v):
    """12 significant digits for reals, exact integers, empty string for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            return str(float(v))
        return f"{float(v):.12g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.12g}") if math.isfinite(v) else None
    return v


def render(rows: Sequence[dict], columns: Sequence[str], form: str) -> str:
    if form == "json":
        return "\n".join(json.dumps({c: _json_value(r.get(c)) for c in columns}) for r in rows) + ("\n" if rows else "")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, out: Optional[str]) -> None:
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# grids and configuration


def parse_grid(spec: str) -> list:
    """``"lo:hi:n"`` (inclusive linspace) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid must be lo:hi:n, got {spec!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise DomainError("grid needs at least one point")
        return [float(x) for x in np.linspace(lo, hi, n)]
    return [float(x) for x in spec.split(",") if x.strip()]


def _config_defaults(path: Optional[str], command: str) -> dict:
    """Key-value pairs from the ``[common]`` and ``[<command>]`` sections of an INI file."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise DomainError(f"cannot read config file {path!r}")
    out = {}
    for section in ("common", command):
        if cp.has_section(section):
            out.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ere", description="Maslov-type and collision indices of elliptic relative equilibria")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file; sections [common] and one per command, keys mirror the flags")
        sp.add_argument("--out", help="output file (default: standard output)")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: ERE_JOBS or 1)")
        sp.add_argument("--tol-abs", type=float, default=None)
        sp.add_argument("--tol-rel", type=float, default=None)

    sp = sub.add_parser("index", help="i_1, i_-1, mu_d, mu_n and the spectral class at one point")
    common(sp)
    sp.add_argument("--family")
    sp.add_argument("--param", type=float)
    sp.add_argument("--e", type=float)
    sp.add_argument("--domain", choices=("auto", "true_anomaly", "blowup_tau"), default=None)

    sp = sub.add_parser("collision", help="collision indices on l0 and l+")
    common(sp)
    sp.add_argument("--family")
    sp.add_argument("--param", type=float)
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--strict", action="store_true", default=None, help="exit 4 if the nondegeneracy probe sees a jump")
    sp.add_argument("--trace", nargs="?", const="-", default=None,
                    help="write (tau, determinant) samples along l+ to this file ('-' appends to the output)")
    sp.add_argument("--no-probe", action="store_true", default=None)

    sp = sub.add_parser("sweep", help="stability cells over a (parameter, e) grid")
    common(sp)
    sp.add_argument("--family")
    sp.add_argument("--params", help="lo:hi:n or comma list")
    sp.add_argument("--es", help="lo:hi:n or comma list")
    sp.add_argument("--no-timing", action="store_true", default=None, help="leave wall_ms empty (byte-stable output)")

    sp = sub.add_parser("trace-curves", help="degenerate curves of the Euler family")
    common(sp)
    sp.add_argument("--es", help="lo:hi:n or comma list of eccentricities")
    sp.add_argument("--jmax", type=int, default=None)
    sp.add_argument("--delta-max", type=float, default=None)
    sp.add_argument("--n-scan", type=int, default=None)

    sp = sub.add_parser("verify", help="run the acceptance battery")
    common(sp)
    sp.add_argument("--level", choices=("fast", "full"), default=None)
    sp.add_argument("--only", help="comma list of criterion numbers")
    return p


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    """Config-file values fill whatever the command line left unset."""
    conf = _config_defaults(getattr(args, "config", None), args.command)
    for key, raw in conf.items():
        if getattr(args, key, None) is not None or not hasattr(args, key):
            continue
        cur = None
        if key in ("param", "e", "tol_abs", "tol_rel", "tmax", "delta_max"):
            cur = float(raw)
        elif key in ("jobs", "jmax", "n_scan"):
            cur = int(raw)
        elif key in ("strict", "no_probe", "no_timing"):
            cur = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            cur = raw
        setattr(args, key, cur)
    if getattr(args, "format", None) is None:
        args.format = "csv"
    return args


def _tols(args) -> tuple:
    rtol = args.tol_rel if args.tol_rel is not None else DEFAULT_RTOL
    atol = args.tol_abs if args.tol_abs is not None else DEFAULT_ATOL
    if not (0 < rtol < 1 and 0 < atol < 1):
        raise DomainError("tolerances must lie in (0, 1)")
    return rtol, atol


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise DomainError("missing required setting(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ---------------------------------------------------------------------------
# commands

INDEX_COLUMNS = ("family", "param", "e", "i1", "im1", "mu_d", "mu_n", "nu1", "num1", "classification", "converged",
                 "domain", "tol_abs", "tol_rel", "drift", "wall_ms")


def cmd_index(args) -> int:
    _need(args, "family", "param", "e")
    rtol, atol = _tols(args)
    t0 = time.perf_counter()
    cfg = build_config(args.family, args.param)
    if not 0 <= args.e < 1:
        raise DomainError(f"eccentricity must lie in [0, 1), got {args.e}")
    g = fundamental_for(cfg, args.e, domain=args.domain or "auto", rtol=rtol, atol=atol)
    pm = index_pm1(g)
    m = morse_indices(cfg, args.e, g)
    rep = classify(g.monodromy)
    row = dict(
        family=cfg.family, param=args.param, e=args.e, i1=pm.i1, im1=pm.im1, mu_d=m.mu_d, mu_n=m.mu_n,
        nu1=pm.nu1, num1=pm.num1, classification=rep.classification, converged=g.drift <= 1e-9,
        domain=g.domain, tol_abs=atol, tol_rel=rtol, drift=g.drift, wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    emit(render([row], INDEX_COLUMNS, args.format), args.out)
    return 0


COLLISION_COLUMNS = ("family", "param", "quantity", "value", "converged", "status", "method", "T_max")


def cmd_collision(args) -> int:
    _need(args, "family", "param")
    rtol, atol = _tols(args)
    cfg = build_config(args.family, args.param)
    kw = dict(T_max=args.tmax, rtol=rtol, atol=atol)
    base = dict(family=cfg.family, param=args.param)
    rows = []
    T = args.tmax if args.tmax is not None else col.default_T_max(cfg)

    def add(q, value, converged=True, status="ok", method="analytic", Tm=None):
        rows.append(dict(base, quantity=q, value=value, converged=converged, status=status, method=method, T_max=Tm))

    for key, v in col.l0_analytic_indices(cfg).items():
        add(key, v)
    for key, v in col.l0_numeric_indices(cfg, **kw).items():
        add(key, v, method="frame", Tm=T)
    k = cfg.k
    for name, V in (("i(Vd;l+)", dirichlet(k)), ("i(Vn;l+)", neumann(k))):
        r = col.heteroclinic_index_lplus(cfg, V, **kw)
        add(name, r.index, r.diagnostics["converged"], r.diagnostics["status"], "frame", T)
    if cfg.N is not None:
        for key, v in col.brake_split(cfg, **kw).items():
            add(key, v, method="frame", Tm=T)
        if k == 2:
            Vp, Vm = col.brake_subspaces(cfg)
            for name, V in (("i-(V+;l+-)", Vp), ("i-(V-;l+-)", Vm)):
                _, rep = col.exterior_index_4d(col.HalfClinicProblem("lplus_minus", cfg, V, T_max=args.tmax))
                add(name, rep.index, rep.diagnostics["converged"], rep.diagnostics["status"], "exterior", T)
    probe = None
    if not args.no_probe and cfg.family in ("euler", "lagrange", "ring3"):
        probe = col.nondegeneracy_probe(cfg.family, cfg.param, rtol=rtol, atol=atol)
        add("probe", probe.status, probe.status == "stable", probe.status, "probe", None)
    text = render(rows, COLLISION_COLUMNS, args.format)
    if args.trace is not None:
        trows = []
        for name, V in (("Vd", dirichlet(k)), ("Vn", neumann(k))):
            tr = col.determinant_trace(col.HalfClinicProblem("lplus_full", cfg, V, **kw))
            step = max(1, len(tr.times) // 2000)
            trows += [dict(reference=name, tau=t, determinant=v) for t, v in zip(tr.times[::step], tr.values[::step])]
        ttext = render(trows, ("reference", "tau", "determinant"), args.format)
        if args.trace == "-":
            text = text + "\n" + ttext
        else:
            emit(ttext, args.trace)
    emit(text, args.out)
    if args.strict and probe is not None and probe.status == "jump_detected":
        raise ProbeFailure(f"nondegeneracy probe detected an index jump near {probe.candidate}")
    return 0


def cmd_sweep(args) -> int:
    _need(args, "family", "params", "es")
    rtol, atol = _tols(args)
    params, es = parse_grid(args.params), parse_grid(args.es)
    for p in params:
        build_config(args.family, p)  # validate the whole grid before computing
    for e in es:
        if not 0 <= e < 1:
            raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    res = sweep(args.family, params, es, jobs=args.jobs if args.jobs is not None else default_jobs(), rtol=rtol, atol=atol)
    rows = []
    for c in res.cells:
        r = c.row()
        if args.no_timing:
            r["wall_ms"] = None
        rows.append(r)
    emit(render(rows, SWEEP_COLUMNS, args.format), args.out)
    if not res.audit["monotone"]:
        sys.stderr.write(json.dumps({"warning": "monotonicity", "violations": res.audit["violations"]}) + "\n")
    return 0 if res.ok_fraction >= 0.99 else 3


CURVE_COLUMNS = ("e", "kind", "j", "symbol", "delta", "width", "size_label", "coincident", "ordering_ok")


def cmd_trace_curves(args) -> int:
    _need(args, "es")
    es = parse_grid(args.es)
    kw = {}
    if args.jmax is not None:
        kw["j_max"] = args.jmax
    if args.delta_max is not None:
        kw["delta_max"] = args.delta_max
    if args.n_scan is not None:
        kw["n_scan"] = args.n_scan
    curves = trace_degenerate_curves(es, **kw)
    rows = []
    for e in es:
        sl = small_large(curves, e)
        order = ordering_holds(curves, e)
        for c in curves:
            d = c.at(e)
            if d is None:
                continue
            width = next(p.width for p in c.points if p.e == e)
            size = coincident = None
            if c.kind != "one_degenerate" and c.j in sl:
                s, l = sl[c.j]
                coincident = abs(l - s) < 1e-6
                size = "s" if d == s and not coincident else ("l" if not coincident else "s=l")
            rows.append(dict(e=e, kind=c.kind, j=c.j, symbol=c.symbol, delta=d, width=width, size_label=size,
                             coincident=coincident, ordering_ok=order))
    emit(render(rows, CURVE_COLUMNS, args.format), args.out)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    level = args.level or "fast"
    only = [int(x) for x in args.only.split(",")] if args.only else None
    lines = []

    def echo(line):
        lines.append(line)
        if not args.out:
            print(line, flush=True)

    results = run_all(level, only, echo)
    if args.out:
        emit("\n".join(lines) + "\n", args.out)
    passed = sum(r.passed for r in results)
    summary = f"{passed}/{len(results)} criteria passed (level {level})"
    print(summary, file=sys.stderr if args.out else sys.stdout)
    return 0 if passed == len(results) else 5


HANDLERS = {
    "index": cmd_index,
    "collision": cmd_collision,
    "sweep": cmd_sweep,
    "trace-curves": cmd_trace_curves,
    "verify": cmd_verify,
}


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        args = _merge(args)
        return HANDLERS[args.command](args)
    except EREError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(record) + "\n")
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
