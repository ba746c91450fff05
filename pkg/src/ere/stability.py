"""Morse indices, hyperbolicity, degenerate curves, sweeps and near-collision limits."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .collision import brake_subspaces, heteroclinic_index_lplus
from .errors import ConsistencyError, ConvergenceError, DomainError, EREError
from .flow import (
    DEFAULT_ATOL,
    DEFAULT_METHOD,
    DEFAULT_ORIGIN,
    DEFAULT_RTOL,
    FundamentalPath,
    classify,
    fundamental_for,
    true_anomaly_generator,
)
from .maslov import LagrangianPath, count_intersection, index_pm1, maslov_index
from .models import CentralConfig, build_config
from .symplectic import as_columns, dirichlet, neumann, pairing_determinant


# ---------------------------------------------------------------------------
# Morse indices and hyperbolicity


@dataclass
class MorseResult:
    phi_d: int
    phi_n: int
    mu_d: int
    mu_n: int
    nu_d: int
    nu_n: int

    @property
    def degenerate_d(self) -> bool:
        return self.nu_d > 0

    @property
    def degenerate_n(self) -> bool:
        return self.nu_n > 0


def _gamma(cfg, e, gamma=None, **kw) -> FundamentalPath:
    if not 0 <= e < 1:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    return gamma if gamma is not None else fundamental_for(cfg, e, **kw)


def morse_indices(cfg: CentralConfig, e: float, gamma: Optional[FundamentalPath] = None, **kw) -> MorseResult:
    """``phi_d = mu(V_d, gamma V_d) - k`` and ``phi_n = mu(V_n, gamma V_n)``.

    Endpoint degeneracy (``V_d`` or ``V_n`` meeting its own image at the end
    of the period) is reported in ``nu_d``/``nu_n``; values are still returned.
    """
    g = _gamma(cfg, e, gamma, **kw)
    k = cfg.k
    Vd, Vn = dirichlet(k), neumann(k)
    rd = maslov_index(g.lagrangian_path(Vd), Vd)
    rn = maslov_index(g.lagrangian_path(Vn), Vn)
    return MorseResult(rd.index - k, rn.index, rd.index, rn.index, rd.end_kernel, rn.end_kernel)


@dataclass
class HyperbolicityResult:
    status: str  # hyperbolic_certified | not_certified
    morse: MorseResult
    classification: str
    evidence: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == "hyperbolic_certified"


def hyperbolicity_check(cfg: CentralConfig, e: float, gamma: Optional[FundamentalPath] = None, **kw) -> HyperbolicityResult:
    """Certify hyperbolicity from ``phi_n == phi_d`` with the Neumann problem nondegenerate.

    The certificate is cross-checked against the eigenvalues of the
    monodromy; a certified point whose spectrum is not hyperbolic raises
    :class:`ConsistencyError`.
    """
    g = _gamma(cfg, e, gamma, **kw)
    m = morse_indices(cfg, e, g)
    rep = classify(g.monodromy)
    ok = m.phi_n == m.phi_d and m.nu_n == 0
    evidence = {
        "phi_d": m.phi_d,
        "phi_n": m.phi_n,
        "nu_n": m.nu_n,
        "eigenvalues": rep.eigenvalues,
        "drift": g.drift,
        "domain": g.domain,
    }
    if ok and not rep.hyperbolic:
        raise ConsistencyError(
            f"{cfg.label()} e={e}: index criterion certifies hyperbolicity but the monodromy is {rep.classification}"
        )
    return HyperbolicityResult("hyperbolic_certified" if ok else "not_certified", m, rep.classification, evidence)


# ---------------------------------------------------------------------------
# brake-split half-period indices


def half_period_paths(cfg: CentralConfig, e: float, origin: float = DEFAULT_ORIGIN, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                      method=DEFAULT_METHOD) -> dict:
    """``t -> gamma(t) V`` over the half period ``[origin, origin + pi]`` for ``V = V+-(Nhat)``."""
    Vp, Vm = brake_subspaces(cfg)
    B = true_anomaly_generator(cfg, e)
    iv = (origin, origin + math.pi)
    return {s: LagrangianPath.from_flow(B, V, iv, rtol, atol, method) for s, V in (("+", Vp), ("-", Vm))}


def brake_half_indices(cfg: CentralConfig, e: float, **kw) -> dict:
    """``mu(V^a, gamma V^b)`` over the half period for ``a, b`` in ``{+, -}``.

    With these, ``i_1 + k = mu(V+, gamma V+) + mu(V-, gamma V-)`` and
    ``i_-1 = mu(V+, gamma V-) + mu(V-, gamma V+)``.
    """
    Vp, Vm = brake_subspaces(cfg)
    ref = {"+": Vp, "-": Vm}
    paths = half_period_paths(cfg, e, **kw)
    return {(a, b): maslov_index(paths[b], ref[a]).index for a in "+-" for b in "+-"}


def brake_pairings(cfg: CentralConfig, e: float, rtol: float = 1e-10, atol: float = 1e-10, **kw) -> dict:
    """Half-period pairing determinants ``det(Z_a^T J gamma Z_b)``.

    ``('+','+')`` and ``('-','-')`` vanish on 1-degenerate points, ``('+','-')``
    on psi+ points and ``('-','+')`` on psi- points.  Unlike ``det(M -+ I)``
    they change sign transversally there.
    """
    Vp, Vm = brake_subspaces(cfg)
    ref = {"+": Vp.columns, "-": Vm.columns}
    paths = half_period_paths(cfg, e, rtol=rtol, atol=atol, **kw)
    return {(a, b): pairing_determinant(ref[a], paths[b].end_columns) for a in "+-" for b in "+-"}


# ---------------------------------------------------------------------------
# degenerate curves

_PAIRING = {"one_degenerate": ("+", "+"), "minus_one_plus": ("+", "-"), "minus_one_minus": ("-", "+")}


@dataclass
class CurvePoint:
    e: float
    delta: float
    width: float


@dataclass
class DegenerateCurve:
    kind: str  # one_degenerate | minus_one_plus | minus_one_minus
    j: int
    points: list = field(default_factory=list)

    @property
    def symbol(self) -> str:
        return {"one_degenerate": "phi", "minus_one_plus": "psi+", "minus_one_minus": "psi-"}[self.kind] + f"_{self.j}"

    def at(self, e: float) -> Optional[float]:
        for p in self.points:
            if p.e == e:
                return p.delta
        return None


def default_delta_max(e: float) -> float:
    return 0.125 - 1e-4 if e >= 0.999 else 7.0


def _roots_for(e: float, delta_max: float, n_scan: int, width: float, scan_tol: float) -> dict:
    """Roots in ``delta`` of the three pairing determinants at fixed ``e``."""

    def vals(d, tol):
        return brake_pairings(build_config("euler", d), e, rtol=tol, atol=tol)

    # denser near zero, where curves accumulate for e close to 1
    grid = np.unique(np.concatenate([np.geomspace(1e-4, delta_max, n_scan // 2), np.linspace(1e-4, delta_max, n_scan // 2)]))
    table = [vals(d, scan_tol) for d in grid]
    out = {}
    for kind, key in _PAIRING.items():
        f = np.array([t[key] for t in table])
        roots = []
        cells = []
        for i in range(len(grid) - 1):
            if np.sign(f[i]) != np.sign(f[i + 1]):
                cells.append((grid[i], grid[i + 1]))
            elif i > 0 and abs(f[i]) < min(abs(f[i - 1]), abs(f[i + 1])) and abs(f[i]) < 0.05:
                # possible pair of roots inside one cell: refine locally
                sub = np.linspace(grid[i - 1], grid[i + 1], 41)
                fs = np.array([vals(d, scan_tol)[key] for d in sub])
                for j in range(len(sub) - 1):
                    if np.sign(fs[j]) != np.sign(fs[j + 1]):
                        cells.append((sub[j], sub[j + 1]))
        g = lambda d: vals(d, DEFAULT_RTOL)[key]
        for lo, hi in sorted(set(cells)):
            try:
                r = brentq(g, lo, hi, xtol=width / 4)
            except ValueError:
                # sign flip only at scan tolerance
                continue
            a, b = max(lo, r - width / 2), min(hi, r + width / 2)
            ga, gb = g(a), g(b)
            w = b - a if np.sign(ga) != np.sign(gb) else hi - lo
            if all(abs(r - r0) > 1e-6 for r0, _ in roots):
                roots.append((r, w))
        out[kind] = roots
    return out


def trace_degenerate_curves(
    e_list: Sequence[float],
    j_max: int = 3,
    delta_max: Optional[float] = None,
    n_scan: int = 160,
    width: float = 1e-8,
    scan_tol: float = 1e-8,
    family: str = "euler",
) -> list:
    """Locate ``phi_j(e)``, ``psi_j+(e)`` and ``psi_j-(e)`` for the Euler family.

    At each ``e`` the parameter ``delta`` is scanned on ``(0, delta_max]``,
    sign changes of the brake-split half-period pairings are bracketed and
    refined to ``width``.  Branch ``j`` is the ordinal of the root along
    ``delta`` (``i_1`` steps by 2 at each ``phi_j``); see :func:`label_check`
    for the index-jump cross-check.
    """
    if family != "euler":
        raise DomainError("degenerate-curve tracing is implemented for the Euler family")
    curves = {}
    for e in e_list:
        if not 0 <= e < 1:
            raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
        dm = default_delta_max(e) if delta_max is None else delta_max
        roots = _roots_for(e, dm, n_scan, width, scan_tol)
        for kind, rs in roots.items():
            for j, (r, w) in enumerate(sorted(rs)[:j_max], start=1):
                curves.setdefault((kind, j), DegenerateCurve(kind, j)).points.append(CurvePoint(e, r, w))
    order = {"minus_one_plus": 0, "minus_one_minus": 1, "one_degenerate": 2}
    return sorted(curves.values(), key=lambda c: (c.j, order[c.kind]))


def small_large(curves: list, e: float) -> dict:
    """``psi_j^s = min(psi_j+, psi_j-)`` and ``psi_j^l = max(...)`` at ``e``."""
    by = {(c.kind, c.j): c.at(e) for c in curves}
    out = {}
    js = sorted({c.j for c in curves})
    for j in js:
        p, m = by.get(("minus_one_plus", j)), by.get(("minus_one_minus", j))
        if p is not None and m is not None:
            out[j] = (min(p, m), max(p, m))
    return out


def ordering_holds(curves: list, e: float) -> bool:
    """``0 < psi_1^s <= psi_1^l < phi_1 < psi_2^s <= psi_2^l < phi_2 < ...`` over the branches present."""
    sl = small_large(curves, e)
    phis = {c.j: c.at(e) for c in curves if c.kind == "one_degenerate" and c.at(e) is not None}
    seq = []
    for j in sorted(set(sl) | set(phis)):
        if j in sl:
            seq += [(sl[j][0], False), (sl[j][1], True)]  # flag: the comparison leading to it may be equality
        if j in phis:
            seq.append((phis[j], False))
    if not seq or seq[0][0] <= 0:
        return False
    for (a, _), (b, eq_ok) in zip(seq[:-1], seq[1:]):
        if not (a <= b if eq_ok else a < b):
            return False
    return True


def label_check(curves: list, e: float) -> dict:
    """``i_1`` and ``i_-1`` between consecutive roots at ``e``.

    Returns ``{'i1': [(delta, i_1), ...], 'im1': [(delta, i_-1), ...]}`` sampled
    at the midpoints; ``i_1`` should climb by 2 across each ``phi_j`` and
    ``i_-1`` by 1 across each ``psi``.
    """
    phis = sorted(c.at(e) for c in curves if c.kind == "one_degenerate" and c.at(e) is not None)
    psis = sorted(c.at(e) for c in curves if c.kind != "one_degenerate" and c.at(e) is not None)

    def mids(rs):
        pts = [0.0] + rs
        m = [0.5 * (a + b) for a, b in zip(pts[:-1], pts[1:])]
        return m + [rs[-1] * 1.02 + 1e-3] if rs else m

    out = {"i1": [], "im1": []}
    for key, rs in (("i1", phis), ("im1", psis)):
        for d in mids(rs):
            r = index_pm1(fundamental_for(build_config("euler", d), e))
            out[key].append((d, r.i1 if key == "i1" else r.im1))
    return out


# ---------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = ("family", "param", "e", "i1", "im1", "mu_d", "mu_n", "nu1", "num1", "classification", "status", "drift",
                 "wall_ms")


@dataclass
class StabilityCell:
    family: str
    param: float
    e: float
    i1: Optional[int] = None
    im1: Optional[int] = None
    mu_d: Optional[int] = None
    mu_n: Optional[int] = None
    nu1: Optional[int] = None
    num1: Optional[int] = None
    classification: str = ""
    status: str = "ok"
    drift: Optional[float] = None
    wall_ms: Optional[float] = None
    message: str = ""
    domain: str = ""
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def row(self) -> dict:
        return {c: getattr(self, c) for c in SWEEP_COLUMNS}


def compute_cell(family: str, param: float, e: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 R=None) -> StabilityCell:
    """All indices at one ``(param, e)``; failures are caught and recorded in ``status``."""
    t0 = time.perf_counter()
    cell = StabilityCell(family, float(param), float(e), rtol=rtol, atol=atol)
    try:
        cfg = build_config(family, param, R=R)
        g = fundamental_for(cfg, e, rtol=rtol, atol=atol)
        pm = index_pm1(g)
        m = morse_indices(cfg, e, g)
        rep = classify(g.monodromy)
        cell.i1, cell.im1, cell.nu1, cell.num1 = pm.i1, pm.im1, pm.nu1, pm.num1
        cell.mu_d, cell.mu_n = m.mu_d, m.mu_n
        cell.classification = rep.classification
        cell.drift = float(g.drift)
        cell.domain = g.domain
        if g.drift > 1e-9:
            cell.status = "drift"
    except DomainError as exc:
        cell.status, cell.message = "domain_error", str(exc)
    except ConvergenceError as exc:
        cell.status, cell.message = "convergence_error", str(exc)
    except EREError as exc:
        cell.status, cell.message = "error", str(exc)
    cell.wall_ms = (time.perf_counter() - t0) * 1e3
    return cell


def _cell_task(args):
    return compute_cell(*args)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("ERE_JOBS", "1")))
    except ValueError:
        return 1


@dataclass
class SweepResult:
    cells: list
    audit: dict

    @property
    def ok_fraction(self) -> float:
        return sum(c.status == "ok" for c in self.cells) / max(1, len(self.cells))


def sweep(family: str, params: Sequence[float], es: Sequence[float], jobs: Optional[int] = None,
          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> SweepResult:
    """Row-major sweep (outer loop over ``e``, inner over the parameter).

    Cells run in a process pool of ``jobs`` workers (``ERE_JOBS`` by
    default); results are returned in grid order whatever the parallelism.
    The audit lists rows where ``i_1`` or ``i_-1`` decrease as the
    parameter increases.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(family, float(p), float(e), rtol, atol) for e in es for p in params]
    if jobs == 1:
        cells = [_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cells = list(ex.map(_cell_task, tasks, chunksize=1))
    return SweepResult(cells, monotonicity_audit(cells))


def monotonicity_audit(cells: Sequence[StabilityCell]) -> dict:
    rows = {}
    for c in cells:
        rows.setdefault(c.e, []).append(c)
    violations = []
    for e, row in rows.items():
        row = sorted((c for c in row if c.status == "ok"), key=lambda c: c.param)
        for a, b in zip(row[:-1], row[1:]):
            for name in ("i1", "im1"):
                if getattr(b, name) < getattr(a, name):
                    violations.append((e, a.param, b.param, name, getattr(a, name), getattr(b, name)))
    return {"monotone": not violations, "violations": violations}


# ---------------------------------------------------------------------------
# near-collision limits


@dataclass
class NearCollisionRow:
    e: float
    mu_d: int
    mu_n: int
    i1: int
    im1: int
    matched: bool


@dataclass
class NearCollisionReport:
    targets: tuple  # (mu_d, mu_n, i1, im1)
    rows: list
    first_match: Optional[float]
    tail_monotone: bool
    diagnostic: str = ""


def collision_targets(cfg: CentralConfig, **kw) -> tuple:
    """``(k + i(V_d;l+), 2 phi + i(V_d;l+), phi + i(V_d;l+), phi + i(V_d;l+))``."""
    rep = heteroclinic_index_lplus(cfg, dirichlet(cfg.k), **kw)
    if not rep.diagnostics.get("converged"):
        raise ConvergenceError("i(V_d; l+) did not converge; the configuration may be collision degenerate")
    i_d = rep.index
    phi = cfg.morse_index
    return (cfg.k + i_d, 2 * phi + i_d, phi + i_d, phi + i_d)


def near_collision_report(cfg: CentralConfig, e_sequence: Sequence[float], targets: Optional[tuple] = None,
                          **kw) -> NearCollisionReport:
    """Indices along ``e -> 1`` compared with the collision-index limits."""
    if not cfg.hyperbolic_equilibria:
        raise DomainError(f"lambda_1(R) = {cfg.lambda1:.6g} <= -1/8: no collision limit")
    if not cfg.nondegenerate:
        raise DomainError("R is degenerate")
    targets = collision_targets(cfg) if targets is None else tuple(targets)
    rows = []
    for e in sorted(e_sequence):
        g = fundamental_for(cfg, e, **kw)
        pm = index_pm1(g)
        m = morse_indices(cfg, e, g)
        vals = (m.mu_d, m.mu_n, pm.i1, pm.im1)
        rows.append(NearCollisionRow(e, *vals, vals == targets))
    matched = [r.matched for r in rows]
    first = None
    for i, r in enumerate(rows):
        if all(matched[i:]):
            first = r.e
            break
    tail = not any(a and not b for a, b in zip(matched[:-1], matched[1:]))
    diag = ""
    if first is None:
        diag = ("indices did not reach the collision limits on this sequence; either 1 - e is not yet small "
                "enough or the configuration is collision degenerate")
    return NearCollisionReport(targets, rows, first, tail, diag)


# ---------------------------------------------------------------------------
# growth in the non-hyperbolic regime


def growth_lower_bound(cfg: CentralConfig, e: float) -> tuple:
    """``(bound, applicable)`` with ``bound = 2 sqrt(r1)/pi ln(eps^2/sqrt(e_hat)) - 6``.

    ``lambda_1(R) = -1/8 - r1``, ``eps = min(r1/(2 r1 + 5), 1/8) / 2`` and
    ``e_hat = (1 - e^2)/2``; the bound is a theorem when ``e_hat < eps^3``.
    """
    r1 = -0.125 - cfg.lambda1
    if r1 <= 0:
        raise DomainError("the growth bound needs lambda_1(R) < -1/8")
    eps = 0.5 * min(r1 / (2 * r1 + 5), 0.125)
    e_hat = 0.5 * (1 - e * e)
    bound = 2 * math.sqrt(r1) / math.pi * math.log(eps * eps / math.sqrt(e_hat)) - 6
    return bound, e_hat < eps ** 3
