"""Acceptance battery shared by ``ere verify`` and the test-suite.

Each check returns a :class:`CheckResult`; nothing here raises on a failed
comparison, so a report always covers every criterion.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .collision import (
    HalfClinicProblem,
    brake_split,
    brake_subspaces,
    exterior_index_4d,
    half_clinic_index,
    heteroclinic_index_lplus,
    l0_analytic_indices,
    l0_numeric_indices,
)
from .flow import fundamental_for, integrate_fundamental
from .maslov import LagrangianPath, graph_path, hormander_index, index_pm1, maslov_index
from .models import build_config, equilibrium_data
from .stability import (
    hyperbolicity_check,
    morse_indices,
    near_collision_report,
    ordering_holds,
    small_large,
    trace_degenerate_curves,
    growth_lower_bound,
)
from .symplectic import (
    dirichlet,
    direct_sum_frame,
    graph_frame,
    neumann,
    random_symplectic,
    standard_J,
    symplectic_sum,
    to_standard,
)


@dataclass
class CheckResult:
    number: int
    name: str
    anchor: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name} ({self.anchor}): {self.detail} [{self.seconds:.1f}s]"


def _timed(fn: Callable[[], tuple]) -> tuple:
    t0 = time.perf_counter()
    passed, detail, data = fn()
    return passed, detail, data, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# individual criteria


def check_kepler(level="full") -> tuple:
    rows, ok = [], True
    for e in (0.0, 0.3, 0.9):
        t0 = time.perf_counter()
        r = index_pm1(fundamental_for(build_config("euler", 0.0), e))
        dt = time.perf_counter() - t0
        good = (r.i1, r.im1) == (0, 2) and dt < 1.0
        ok &= good
        rows.append(f"e={e}: ({r.i1},{r.im1}) {dt:.2f}s")
    return ok, "; ".join(rows), {}


def check_l0_tables(level="full") -> tuple:
    ok, parts = True, []
    t0 = time.perf_counter()
    for fam, p in (("euler", 0.1), ("lagrange", 6.0)):
        cfg = build_config(fam, p)
        num, ana = l0_numeric_indices(cfg), l0_analytic_indices(cfg)
        ok &= num == ana
        parts.append(f"{fam}({p}) {tuple(num.values())} vs {tuple(ana.values())}")
    dt = time.perf_counter() - t0
    ok &= dt < 10.0
    return ok, "; ".join(parts) + f"; total {dt:.1f}s", {}


def hormander_table(r: float) -> tuple:
    """``s(Vd,Vn,Vd,Vu-)``, ``s(Vd,Vn,Vn,Vu-)``, ``s(Vn,Vd,Vu-,Vu+)``, ``s(Vd,Vu-,Vn,Vs-)``, ``s(Vd,Vu-,Vd,Vs-)``."""
    cfg = build_config("custom", R=np.array([[r]]))
    Vd, Vn = dirichlet(1), neumann(1)
    m, p = equilibrium_data(cfg, -1), equilibrium_data(cfg, 1)
    return (
        hormander_index(Vd, Vn, Vd, m.V_u),
        hormander_index(Vd, Vn, Vn, m.V_u),
        hormander_index(Vn, Vd, m.V_u, p.V_u),
        hormander_index(Vd, m.V_u, Vn, m.V_s),
        hormander_index(Vd, m.V_u, Vd, m.V_s),
    )


def check_hormander(level="full") -> tuple:
    expect = {-0.1: (1, 0, 1, 0, 0), 0.5: (1, 0, 0, 0, 0)}
    got = {r: hormander_table(r) for r in expect}
    ok = got == expect
    return ok, "; ".join(f"r={r}: {got[r]}" for r in expect), {}


def check_euler_collision(level="full") -> tuple:
    deltas = (0.03, 0.05, 0.1) if level == "fast" else (0.03, 0.05, 0.1, 0.12)
    ok, parts = True, []
    t0 = time.perf_counter()
    for d in deltas:
        cfg = build_config("euler", d)
        Vp, Vm = brake_subspaces(cfg)
        frame = [half_clinic_index(HalfClinicProblem("lplus_minus", cfg, V)) for V in (Vp, Vm)]
        ext = [exterior_index_4d(HalfClinicProblem("lplus_minus", cfg, V))[1] for V in (Vp, Vm)]
        rd = heteroclinic_index_lplus(cfg, dirichlet(2))
        rn = heteroclinic_index_lplus(cfg, neumann(2))
        split = tuple(r.index for r in frame)
        conv = all(r.diagnostics["converged"] for r in frame + ext + [rd, rn])
        good = (
            conv
            and split == (1, 1)
            and tuple(r.index for r in ext) == split
            and rd.index == sum(split) == 2
            and rn.index - rd.index == 1
        )
        ok &= good
        parts.append(f"d={d}: split {split} ext {tuple(r.index for r in ext)} i(Vd)={rd.index} i(Vn)={rn.index}")
    dt = time.perf_counter() - t0
    ok &= dt < 60.0
    return ok, "; ".join(parts) + f"; total {dt:.1f}s", {}


def check_lagrange_collision(level="full") -> tuple:
    ok, parts = True, []
    for b in (4.0, 6.0, 8.0):
        cfg = build_config("lagrange", b)
        Vp, Vm = brake_subspaces(cfg)
        reps = [half_clinic_index(HalfClinicProblem("lplus_minus", cfg, V)) for V in (Vp, Vm)]
        split = tuple(r.index for r in reps)
        ok &= split == (0, 0) and all(r.diagnostics["converged"] for r in reps)
        parts.append(f"beta={b}: {split}")
    return ok, "; ".join(parts), {}


def check_near_collision(level="full") -> tuple:
    es = (0.99, 0.995) if level == "fast" else (0.99, 0.995, 0.999)
    t0 = time.perf_counter()
    eu = near_collision_report(build_config("euler", 0.1), es, targets=(4, 4, 3, 3))
    parts = [f"euler(0.1) e={r.e}: (mu_d,mu_n,i1,im1)=({r.mu_d},{r.mu_n},{r.i1},{r.im1})" for r in eu.rows]
    ok = eu.first_match is not None and eu.tail_monotone
    if level != "fast":
        la = near_collision_report(build_config("lagrange", 6.0), (0.999,), targets=(2, 0, 0, 0))
        r = la.rows[0]
        parts.append(f"lagrange(6) e=0.999: ({r.mu_d},{r.mu_n},{r.i1},{r.im1})")
        ok &= r.matched
    parts.append(f"stabilized from e={eu.first_match}")
    dt = time.perf_counter() - t0
    ok &= dt < 300.0
    return ok, "; ".join(parts), {"euler": eu}


def check_growth(level="full") -> tuple:
    ms = (2, 3) if level == "fast" else (2, 3, 4)
    cfg = build_config("euler", 1.0)
    vals, ok, parts = [], True, []
    for m in ms:
        e = 1.0 - 10.0 ** (-m)
        mu_d = morse_indices(cfg, e).mu_d
        bound, applicable = growth_lower_bound(cfg, e)
        ok &= mu_d >= bound
        vals.append(mu_d)
        parts.append(f"m={m}: mu_d={mu_d} bound={bound:.3f}{'' if applicable else ' (outside theorem range)'}")
    ok &= all(b > a for a, b in zip(vals[:-1], vals[1:]))
    return ok, "; ".join(parts), {}


def check_curves(level="full") -> tuple:
    es = (0.9, 0.95, 0.99)
    kw = dict(n_scan=60, delta_max=3.0, j_max=2) if level == "fast" else {}
    curves = trace_degenerate_curves(es, **kw)
    get = lambda kind, j, e: next((c.at(e) for c in curves if c.kind == kind and c.j == j), None)
    order = all(ordering_holds(curves, e) for e in es)
    p1 = [get("minus_one_plus", 1, e) for e in es]
    m1 = get("minus_one_minus", 1, 0.99)
    phi1 = get("one_degenerate", 1, 0.99)
    sl = small_large(curves, 0.99).get(1)
    ok = (
        order
        and None not in p1
        and all(b < a for a, b in zip(p1[:-1], p1[1:]))
        and p1[-1] < 0.02
        and m1 is not None
        and 0.10 < m1 < 0.125
        and phi1 is not None
        and sl is not None
        and sl[1] < phi1 <= 0.125
    )
    detail = (f"ordering {order}; psi1+ {[round(x, 5) for x in p1 if x is not None]}; "
              f"psi1-(0.99)={m1 if m1 is None else round(m1, 5)}; phi1(0.99)={phi1 if phi1 is None else round(phi1, 5)}")
    return ok, detail, {"curves": curves}


# property suite -------------------------------------------------------------


def _rand_sym(n, rng, scale=1.0):
    A = rng.normal(size=(n, n)) * scale
    return 0.5 * (A + A.T)


def _rand_lagrangian(k, rng):
    return graph_frame(_rand_sym(k, rng, 2.0)).transform(random_symplectic(k, rng, 0.5))


def random_problem(rng, k=None):
    k = int(rng.integers(1, 3)) if k is None else k
    B0, B1 = _rand_sym(2 * k, rng), _rand_sym(2 * k, rng)
    w = rng.uniform(0.5, 3.0)
    T = rng.uniform(1.0, 4.0)
    B = lambda t, B0=B0, B1=B1, w=w: B0 + math.cos(w * t) * B1
    return k, B, (0.0, T), _rand_lagrangian(k, rng), _rand_lagrangian(k, rng)


def _mu(B, V, iv, W):
    return maslov_index(LagrangianPath.from_flow(B, V, iv), W).index


def prop_reparametrization(rng) -> bool:
    k, B, (a, b), V, W = random_problem(rng)
    path = LagrangianPath.from_flow(B, V, (a, b))
    al = rng.uniform(-0.9, 0.9)
    rho = lambda s: a + (b - a) * (s + al * math.sin(2 * math.pi * s) / (2 * math.pi))
    drho = lambda s: (b - a) * (1 + al * math.cos(2 * math.pi * s))
    re = LagrangianPath(lambda s: path.frame(rho(s)), (0.0, 1.0), lambda s: drho(s) * B(rho(s)))
    return maslov_index(path, W).index == maslov_index(re, W).index


def prop_homotopy(rng) -> bool:
    k, B, (a, b), V, W = random_problem(rng)
    path = LagrangianPath.from_flow(B, V, (a, b))
    C = _rand_sym(2 * k, rng)
    J = standard_J(k)
    th = lambda t: math.sin(math.pi * (t - a) / (b - a))
    dth = lambda t: math.pi / (b - a) * math.cos(math.pi * (t - a) / (b - a))
    S = lambda t: expm(th(t) * J @ C)

    def Bnew(t):
        Si = np.linalg.inv(S(t))
        return dth(t) * C + Si.T @ B(t) @ Si

    moved = LagrangianPath(lambda t: S(t) @ path.frame(t), (a, b), Bnew)
    return maslov_index(path, W).index == maslov_index(moved, W).index


def prop_additivity(rng) -> bool:
    k, B, (a, b), V, W = random_problem(rng)
    path = LagrangianPath.from_flow(B, V, (a, b))
    c = rng.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a))
    whole = maslov_index(path, W).index
    return whole == maslov_index(path.restrict(a, c), W).index + maslov_index(path.restrict(c, b), W).index


def prop_symplectic_invariance(rng) -> bool:
    k, B, iv, V, W = random_problem(rng)
    S = random_symplectic(k, rng, 0.7)
    Si = np.linalg.inv(S)
    Bs = lambda t: Si.T @ B(t) @ Si
    return _mu(B, V, iv, W) == _mu(Bs, V.transform(S), iv, W.transform(S))


def _standard_sum(Z1, Z2):
    k1, k2 = Z1.shape[1], Z2.shape[1]
    out = np.zeros((2 * (k1 + k2), k1 + k2))
    out[:k1, :k1] = Z1[:k1]
    out[k1 + k2:2 * k1 + k2, :k1] = Z1[k1:]
    out[k1:k1 + k2, k1:] = Z2[:k2]
    out[2 * k1 + k2:, k1:] = Z2[k2:]
    return out


def prop_symplectic_additivity(rng) -> bool:
    k1, B1, iv, V1, W1 = random_problem(rng, 1)
    k2, B2, _, V2, W2 = random_problem(rng, int(rng.integers(1, 3)))
    Bsum = lambda t: symplectic_sum(B1(t), B2(t))
    lhs = _mu(Bsum, _standard_sum(V1.columns, V2.columns), iv, _standard_sum(W1.columns, W2.columns))
    return lhs == _mu(B1, V1, iv, W1) + _mu(B2, V2, iv, W2)


def prop_monotone(rng) -> bool:
    k, B, iv, V, W = random_problem(rng)
    eps = rng.uniform(0.05, 1.0)
    Bm = lambda t: B(t) - eps * np.eye(2 * k)
    return _mu(B, V, iv, W) >= _mu(Bm, V, iv, W)


def prop_graph_reduction(rng) -> bool:
    k, B, iv, L1, L2 = random_problem(rng)
    lhs = maslov_index(graph_path(B, iv, k), to_standard(direct_sum_frame(L1, L2))).index
    return lhs == _mu(B, L1, iv, L2)


PROPERTIES = {
    "I": (prop_reparametrization, 100),
    "II": (prop_homotopy, 100),
    "III": (prop_additivity, 100),
    "IV": (prop_symplectic_invariance, 100),
    "V": (prop_symplectic_additivity, 100),
    "VI": (prop_monotone, 50),
    "graph": (prop_graph_reduction, 50),
}


def check_properties(level="full", seed: int = 20240611) -> tuple:
    t0 = time.perf_counter()
    fails = {}
    for name, (fn, n) in PROPERTIES.items():
        rng = np.random.default_rng([seed, len(name), sum(map(ord, name))])
        bad = sum(not fn(rng) for _ in range(n))
        if bad:
            fails[name] = bad
    dt = time.perf_counter() - t0
    ok = not fails and dt < 120.0
    return ok, (f"failures {fails}" if fails else "all cases agree") + f"; {dt:.1f}s", {}


def check_domains(level="full") -> tuple:
    ok, parts = True, []
    for d in (0.05, 0.1, 1.0):
        cfg = build_config("euler", d)
        for e in (0.3, 0.9):
            a = index_pm1(fundamental_for(cfg, e, domain="true_anomaly"))
            b = index_pm1(fundamental_for(cfg, e, domain="blowup_tau"))
            ok &= (a.i1, a.im1) == (b.i1, b.im1)
            parts.append(f"d={d},e={e}: t {a.i1},{a.im1} / tau {b.i1},{b.im1}")
    return ok, "; ".join(parts), {}


DRIFT_BATTERY = (
    ("euler", 0.0, 0.3),
    ("euler", 0.0, 0.9),
    ("euler", 0.1, 0.99),
    ("euler", 0.1, 0.999),
    ("euler", 1.0, 0.9999),
    ("lagrange", 6.0, 0.999),
    ("lagrange", 8.5, 0.99),
    ("ring3", 0.05, 0.99),
)


def check_integrator(level="full", seed: int = 7) -> tuple:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 4))
        B = _rand_sym(2 * k, rng)
        T = rng.uniform(0.5, 2.0)
        g = integrate_fundamental(lambda t, B=B: B, (0.0, T))
        worst = max(worst, float(np.linalg.norm(g.monodromy - expm(T * standard_J(k) @ B), 2)))
    battery = DRIFT_BATTERY if level != "fast" else [b for b in DRIFT_BATTERY if b[2] < 0.999]
    drifts = {f"{f}({p}),e={e}": fundamental_for(build_config(f, p), e).drift for f, p, e in battery}
    dmax = max(drifts.values())
    ok = worst < 1e-8 and dmax < 1e-9
    return ok, f"max |M - expm| = {worst:.2e}; max drift {dmax:.2e} over {len(drifts)} runs", {"drifts": drifts}


def check_hyperbolicity(level="full") -> tuple:
    es = (0.0, 0.3, 0.6, 0.9, 0.99)
    ok, parts = True, []
    for fam, p in (("lagrange", 8.5), ("ring3", 0.05)):
        cfg = build_config(fam, p)
        stat = []
        for e in es:
            h = hyperbolicity_check(cfg, e)  # raises on an incoherent certificate
            ok &= h.classification == "hyperbolic"
            stat.append(h.status.split("_")[0][:4] + "/" + h.classification[:4])
        parts.append(f"{fam}({p}): {stat}")
    return ok, "; ".join(parts), {}


CRITERIA = (
    (1, "Kepler baseline", "Kepler degeneration", check_kepler),
    (2, "closed-form l0 tables", "l0 index table", check_l0_tables),
    (3, "Hormander table", "Hormander values on scalar blocks", check_hormander),
    (4, "Euler collision indices", "Euler collision nondegeneracy", check_euler_collision),
    (5, "Lagrange collision indices", "Lagrange zero collision index", check_lagrange_collision),
    (6, "near-collision limits", "approximation theorem", check_near_collision),
    (7, "non-hyperbolic growth", "index growth lower bound", check_growth),
    (8, "degenerate-curve limits", "curve limits at delta = 1/8", check_curves),
    (9, "index-axiom properties", "Maslov index properties", check_properties),
    (10, "cross-domain coherence", "anomaly vs blow-up time", check_domains),
    (11, "integrator oracle", "matrix exponential", check_integrator),
    (12, "hyperbolicity theorems", "index criterion for hyperbolicity", check_hyperbolicity),
)


def run_check(number: int, level: str = "full") -> CheckResult:
    num, name, anchor, fn = next(c for c in CRITERIA if c[0] == number)
    t0 = time.perf_counter()
    try:
        passed, detail, data = fn(level)
    except Exception as exc:  # a crash is a failed criterion, not an aborted report
        passed, detail, data = False, f"{type(exc).__name__}: {exc}", {}
    return CheckResult(num, name, anchor, bool(passed), detail, time.perf_counter() - t0, data)


def run_all(level: str = "full", numbers=None, echo: Callable[[str], None] = None) -> list:
    out = []
    for num, *_ in CRITERIA:
        if numbers and num not in numbers:
            continue
        res = run_check(num, level)
        if echo:
            echo(res.line())
        out.append(res)
    return out
