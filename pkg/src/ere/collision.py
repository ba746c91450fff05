"""Collision indices along the heteroclinic orbits of the blow-up system.

On the collision manifold ``q = 0`` the orbit ``l0`` runs from P+ to P-; the
orbit ``l+`` leaves P- and returns to P+ through ``q > 0``.  Half-lines are
``l0-`` (tau >= 0 on l0), ``l0+`` (tau <= 0), ``l+-`` (tau <= 0 on l+) and
``l+,+`` (tau >= 0).  For a reference Lagrangian ``V1``

* ``i+(V1, V0) = mu(V1, gamma(tau) V0, tau >= 0)``,
* ``i-(V1) = mu(V1, V_u(tau), tau <= 0)``,
* ``i(V1) = mu(V1, V_u(tau), tau in R)``,

where ``V_u(tau)`` is the unstable Lagrangian path, equal to the unstable
subspace of the equilibrium at ``tau = -infinity``.  Infinite intervals are
truncated at ``T_max`` and accepted only once the transported frame has
settled on the limiting subspace.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConvergenceError,
    DomainError,
    NonHyperbolicError,
    SymmetryError,
    UnsupportedDimensionError,
)
from .maslov import IndexReport, LagrangianPath, hormander_index, maslov_index
from .models import (
    CentralConfig,
    build_config,
    equilibrium_data,
    hat_B_qQ,
    heteroclinic,
)
from .symplectic import LagrangianFrame, as_columns, dirichlet, neumann, orthonormalize, standard_J, subspace_gap

SIDES = ("l0_minus", "l0_plus", "lplus_minus", "lplus_plus", "l0_full", "lplus_full")

# orbit, kind ('plus' = i+ on [0, T]; 'minus' = i- on [-T, 0]; 'full' on [-T, T])
_SIDE_TABLE = {
    "l0_minus": ("l0", "plus"),
    "l0_plus": ("l0", "minus"),
    "lplus_minus": ("lplus", "minus"),
    "lplus_plus": ("lplus", "plus"),
    "l0_full": ("l0", "full"),
    "lplus_full": ("lplus", "full"),
}
# equilibrium sign at tau -> -infinity and tau -> +infinity
_ENDS = {"l0": (1, -1), "lplus": (-1, 1)}


def default_T_max(cfg: CentralConfig) -> float:
    """``max(200, 40 / min_j eta_j)``; frames settle at rate ``exp(-2 eta_min tau)``."""
    return max(200.0, 40.0 / float(np.min(cfg.eta)))


def orbit_generator(orbit: str, cfg: CentralConfig) -> Callable[[float], np.ndarray]:
    """``tau -> Bhat(q(tau), Q(tau))`` along ``l0`` or ``l+``."""
    s2 = math.sqrt(2.0)
    if orbit == "l0":
        def B(tau):
            return hat_B_qQ(0.0, -s2 * math.tanh(s2 * tau / 2.0), cfg)
    elif orbit == "lplus":
        def B(tau):
            x = s2 * tau / 2.0
            return hat_B_qQ(s2 / math.cosh(x), s2 * math.tanh(x), cfg)
    else:
        raise DomainError(f"unknown orbit {orbit!r}")
    return B


def brake_subspaces(cfg: CentralConfig) -> tuple:
    """``V+(Nhat), V-(Nhat)`` with ``Nhat = diag(N, -N)``."""
    if cfg.N is None:
        raise SymmetryError(f"{cfg.label()} carries no brake symmetry")
    Nh = np.block([[cfg.N, np.zeros_like(cfg.N)], [np.zeros_like(cfg.N), -cfg.N]])
    w, V = np.linalg.eigh(Nh)
    plus = V[:, w > 0]
    minus = V[:, w < 0]
    return LagrangianFrame(plus), LagrangianFrame(minus)


@dataclass
class HalfClinicProblem:
    side: str
    cfg: CentralConfig
    V1: object
    V0: object = None
    T_max: Optional[float] = None
    convergence_tol: float = 1e-6
    window: float = 5.0
    rtol: float = 1e-10
    atol: float = 1e-10
    method: str = "RK45"
    check_sensitivity: bool = False

    def __post_init__(self):
        if self.side not in SIDES:
            raise DomainError(f"unknown side {self.side!r}; expected one of {SIDES}")
        if not self.cfg.hyperbolic_equilibria:
            raise NonHyperbolicError(
                f"lambda_1(R) = {self.cfg.lambda1:.6g} <= -1/8: P+ and P- are not hyperbolic"
            )
        kind = _SIDE_TABLE[self.side][1]
        if kind == "plus" and self.V0 is None:
            raise DomainError(f"side {self.side} needs an initial Lagrangian V0")

    @property
    def horizon(self) -> float:
        return float(self.T_max) if self.T_max is not None else default_T_max(self.cfg)


def _transport(problem: HalfClinicProblem, T: float):
    orbit, kind = _SIDE_TABLE[problem.side]
    cfg = problem.cfg
    B = orbit_generator(orbit, cfg)
    start_sign, end_sign = _ENDS[orbit]
    if kind == "plus":
        interval, seed = (0.0, T), as_columns(problem.V0)
        target = equilibrium_data(cfg, end_sign).V_u
    elif kind == "minus":
        interval, seed = (-T, 0.0), equilibrium_data(cfg, start_sign).V_u.columns
        target = None
    else:
        interval, seed = (-T, T), equilibrium_data(cfg, start_sign).V_u.columns
        target = equilibrium_data(cfg, end_sign).V_u
    path = LagrangianPath.from_flow(B, seed, interval, problem.rtol, problem.atol, problem.method)
    return path, target


def _settled(path: LagrangianPath, target, window: float, tol: float) -> tuple:
    a, b = path.interval
    ts = np.linspace(max(a, b - window), b, 11)
    gaps = np.array([subspace_gap(path.frame(t), target) for t in ts])
    monotone = bool(np.all(np.diff(gaps) <= 1e-10))
    return bool(gaps[-1] < tol and monotone), float(gaps[-1]), monotone


def _single(problem: HalfClinicProblem, T: float) -> IndexReport:
    path, target = _transport(problem, T)
    rep = maslov_index(path, problem.V1)
    rep.diagnostics.update(T_max=T, side=problem.side)
    if target is not None:
        ok, gap, mono = _settled(path, target, problem.window, problem.convergence_tol)
        rep.diagnostics.update(converged=ok, gap=gap, monotone=mono)
        rep.diagnostics["status"] = "ok" if ok else "growing"
    else:
        rep.diagnostics.update(converged=True, status="ok")
    return rep


def half_clinic_index(problem: HalfClinicProblem) -> IndexReport:
    """Maslov index on a half-line or a full heteroclinic, with convergence diagnostics.

    When the frame has not settled on the limiting unstable subspace by
    ``T_max`` the report carries ``status='growing'`` and the index counts
    crossings up to ``T_max`` only.
    """
    T = problem.horizon
    rep = _single(problem, T)
    if problem.check_sensitivity and rep.diagnostics["converged"]:
        others = [_single(problem, f * T).index for f in (0.8, 1.2)]
        rep.diagnostics["sensitivity"] = others
        if any(v != rep.index for v in others):
            rep.diagnostics["status"] = "inconclusive"
            rep.diagnostics["converged"] = False
    return rep


def _require_converged(rep: IndexReport) -> int:
    if not rep.diagnostics.get("converged", True):
        raise ConvergenceError(
            f"{rep.diagnostics.get('side')}: frame did not settle by T_max={rep.diagnostics.get('T_max'):.4g} "
            f"(gap {rep.diagnostics.get('gap', float('nan')):.3e}, status {rep.diagnostics.get('status')})"
        )
    return rep.index


# ---------------------------------------------------------------------------
# l0 tables

L0_KEYS = (
    "i-(Vd;l0+)",
    "i-(Vn;l0+)",
    "i+(Vd,Vd;l0-)",
    "i+(Vd,Vn;l0-)",
    "i+(Vn,Vd;l0-)",
    "i+(Vn,Vn;l0-)",
)


def l0_analytic_indices(cfg: CentralConfig) -> dict:
    """Closed-form indices on ``l0`` assembled from the scalar eigen-blocks of R.

    Along ``l0`` the system splits over the eigenvalues ``r`` of ``R``; each
    scalar block contributes ``i+(Vd,Vd) = 1`` and, when ``r < 0``,
    ``i+(Vd,Vn) = i+(Vn,Vn) = 1``; every other entry vanishes.
    """
    if not cfg.hyperbolic_equilibria:
        raise NonHyperbolicError(f"lambda_1(R) = {cfg.lambda1:.6g} <= -1/8")
    if not cfg.nondegenerate:
        raise DomainError("R has a zero eigenvalue: l0 is degenerate with respect to V_n")
    phi = cfg.morse_index
    return dict(zip(L0_KEYS, (0, 0, cfg.k, phi, 0, phi)))


def l0_numeric_indices(cfg: CentralConfig, **kw) -> dict:
    """The same table by truncated frame transport."""
    k = cfg.k
    Vd, Vn = dirichlet(k), neumann(k)
    spec = {
        "i-(Vd;l0+)": ("l0_plus", Vd, None),
        "i-(Vn;l0+)": ("l0_plus", Vn, None),
        "i+(Vd,Vd;l0-)": ("l0_minus", Vd, Vd),
        "i+(Vd,Vn;l0-)": ("l0_minus", Vd, Vn),
        "i+(Vn,Vd;l0-)": ("l0_minus", Vn, Vd),
        "i+(Vn,Vn;l0-)": ("l0_minus", Vn, Vn),
    }
    out = {}
    for key, (side, V1, V0) in spec.items():
        rep = half_clinic_index(HalfClinicProblem(side, cfg, V1, V0, **kw))
        out[key] = _require_converged(rep)
    return out


def heteroclinic_index_lplus(cfg: CentralConfig, V1, **kw) -> IndexReport:
    """``i(V1; l+)`` by transporting ``V_u`` from ``-T_max`` to ``+T_max``."""
    return half_clinic_index(HalfClinicProblem("lplus_full", cfg, V1, **kw))


# ---------------------------------------------------------------------------
# brake symmetry


def brake_split(cfg: CentralConfig, **kw) -> dict:
    """Indices over ``V+-(Nhat)``: the ``l+-`` values and the ``l0-`` decomposed table."""
    Vp, Vm = brake_subspaces(cfg)
    k = cfg.k
    Vd, Vn = dirichlet(k), neumann(k)

    def minus(V1):
        return _require_converged(half_clinic_index(HalfClinicProblem("lplus_minus", cfg, V1, **kw)))

    def plus(V1, V0):
        return _require_converged(half_clinic_index(HalfClinicProblem("l0_minus", cfg, V1, V0, **kw)))

    out = {
        "i-(V+;l+-)": minus(Vp),
        "i-(V-;l+-)": minus(Vm),
        "i+(V+,Vd;l0-)": plus(Vp, Vd),
        "i+(V-,Vd;l0-)": plus(Vm, Vd),
        "i+(V+,Vn;l0-)": plus(Vp, Vn),
        "i+(V-,Vn;l0-)": plus(Vm, Vn),
        "i+(V+,V+;l0-)": plus(Vp, Vp),
        "i+(V-,V-;l0-)": plus(Vm, Vm),
        "i+(V-,V+;l0-)": plus(Vm, Vp),
        "i+(V+,V-;l0-)": plus(Vp, Vm),
    }
    out["lplus_sum"] = out["i-(V+;l+-)"] + out["i-(V-;l+-)"]
    return out


# ---------------------------------------------------------------------------
# exterior algebra


def _pairs(n: int) -> list:
    return list(itertools.combinations(range(n), 2))


def compound_matrix(A: np.ndarray) -> np.ndarray:
    """Additive compound ``A^(2)`` on the wedge basis ``e_i ^ e_j`` (i < j, lexicographic).

    ``A^(2) (u ^ v) = A u ^ v + u ^ A v``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    P = _pairs(n)
    pos = {p: i for i, p in enumerate(P)}
    out = np.zeros((len(P), len(P)))

    def add(col, a, b, coeff):
        if a == b or coeff == 0.0:
            return
        if a < b:
            out[pos[(a, b)], col] += coeff
        else:
            out[pos[(b, a)], col] -= coeff

    for col, (k, l) in enumerate(P):
        for m in range(n):
            add(col, m, l, A[m, k])
            add(col, k, m, A[m, l])
    return out


def wedge_coordinates(Z: np.ndarray) -> np.ndarray:
    """Plücker coordinates of the 2-plane spanned by the two columns of Z."""
    Z = np.asarray(Z, dtype=float)
    u, v = Z[:, 0], Z[:, 1]
    return np.array([u[i] * v[j] - u[j] * v[i] for i, j in _pairs(Z.shape[0])])


@dataclass
class ZeroTrace:
    times: np.ndarray
    values: np.ndarray
    zeros: list
    tangential: list
    converged: bool
    tail_behavior: str
    sample_times: np.ndarray = field(repr=False, default=None)

    @property
    def count(self) -> int:
        return len(self.zeros)


def exterior_index_4d(problem: HalfClinicProblem, n_samples: int = 20001) -> tuple:
    """Zero counting of ``y6`` for the reversed ``l+-`` system in the wedge space.

    The frame ``Psi(-tau) V1`` (tau >= 0) is represented by its Plücker
    vector ``y``; ``V_d`` meets it exactly when the ``e3 ^ e4`` coordinate
    ``y6`` vanishes.  The growth ``exp(sigma tau)`` of ``y`` is divided out,
    ``sigma`` being the sum of the eigenvalues of ``A(infinity)`` with
    positive real part.  Returns ``(ZeroTrace, IndexReport)``; the index is
    the zero count plus the Hörmander correction ``s(V_d, V_u-, V1, V_s-)``.
    """
    cfg = problem.cfg
    if cfg.k != 2:
        raise UnsupportedDimensionError("the wedge-space method is implemented for k = 2; use half_clinic_index")
    if problem.side != "lplus_minus":
        raise DomainError("the wedge-space method applies to the l+- half line")
    return _exterior(cfg, problem.V1, problem.horizon, problem.rtol, problem.atol, n_samples)


def _exterior(cfg, V1, T, rtol=1e-10, atol=1e-10, n_samples=20001, hormander=True):
    J = standard_J(2)
    B = orbit_generator("lplus", cfg)

    def A(tau):
        return -J @ B(-tau)

    A_inf = -J @ hat_B_qQ(0.0, -math.sqrt(2.0), cfg)
    ev = np.linalg.eigvals(A_inf)
    sigma = float(np.sum(ev.real[ev.real > 0]))
    I6 = np.eye(6)

    def rhs(tau, y):
        return (compound_matrix(A(tau)) - sigma * I6) @ y

    y0 = wedge_coordinates(orthonormalize(as_columns(V1)))
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol * 1e-2, dense_output=True)
    if sol.status != 0:
        raise ConvergenceError(f"wedge-space integration failed: {sol.message}")
    ts = np.unique(np.concatenate([np.linspace(0.0, T, n_samples), sol.t]))
    Y = sol.sol(ts)
    y6 = Y[5]
    scale = np.max(np.abs(Y), axis=0)
    rel = y6 / np.where(scale > 0, scale, 1.0)
    # skip the initial zero: V_d always meets V1 = V+-(Nhat) at tau = 0
    eps = 1e-9
    start = int(np.argmax(np.abs(rel) > eps))
    zeros, tangential = [], []
    from scipy.optimize import brentq

    f = lambda t: float(sol.sol(t)[5])
    for i in range(start, len(ts) - 1):
        if rel[i] == 0.0:
            continue
        if np.sign(rel[i]) != np.sign(rel[i + 1]) and rel[i + 1] != 0.0:
            zeros.append(brentq(f, ts[i], ts[i + 1], xtol=1e-12))
        elif (
            0 < i
            and abs(rel[i]) < 1e-3
            and abs(rel[i]) < min(abs(rel[i - 1]), abs(rel[i + 1]))
            and np.sign(rel[i - 1]) == np.sign(rel[i]) == np.sign(rel[i + 1])
        ):
            tangential.append(float(ts[i]))
    # tail: settled if y6 (relative) changed little over the final stretch
    tail = ts >= T - min(T / 4.0, 25.0)
    drift = float(np.max(rel[tail]) - np.min(rel[tail]))
    settled = drift < 1e-6 and abs(rel[-1]) > eps
    trace = ZeroTrace(ts, rel, zeros, tangential, settled, "settled" if settled else "growing", ts)
    correction = 0
    if hormander and cfg.hyperbolic_equilibria:
        em = equilibrium_data(cfg, -1)
        correction = hormander_index(dirichlet(2), em.V_u, V1, em.V_s)
    rep = IndexReport(
        correction + trace.count,
        [],
        (0, 0),
        {"method": "exterior", "sigma": sigma, "zeros": zeros, "tangential": tangential,
         "converged": settled, "status": "ok" if settled else "growing", "hormander": correction, "T_max": T},
    )
    return trace, rep


def exterior_zero_trace(cfg: CentralConfig, V1, T: float, **kw) -> ZeroTrace:
    """Wedge-space zero trace without the hyperbolicity precondition (for growth studies)."""
    if cfg.k != 2:
        raise UnsupportedDimensionError("the wedge-space method is implemented for k = 2")
    return _exterior(cfg, V1, T, hormander=False, **kw)[0]


# ---------------------------------------------------------------------------
# nondegeneracy probe and Sturm comparison


def _family_config(family: str, p: float) -> CentralConfig:
    """Family formula without the physical domain restriction (probe use only)."""
    if family == "euler":
        return CentralConfig(np.diag([-p, 2 * p + 3]), np.diag([1.0, -1.0]), "euler", p)
    return build_config(family, p)


@dataclass
class ProbeResult:
    status: str
    values: dict
    candidate: Optional[float] = None


def nondegeneracy_probe(family: str, param: float, hs=(1e-3, 1e-4), **kw) -> ProbeResult:
    """Recompute ``i(V_d; l+)`` at ``param`` and ``param +- h``; a change flags a degenerate point."""
    values = {}
    for p in sorted({param} | {param + s * h for h in hs for s in (-1, 1)}):
        try:
            cfg = _family_config(family, p)
            rep = heteroclinic_index_lplus(cfg, dirichlet(cfg.k), **kw)
        except (DomainError, ConvergenceError):
            values[p] = None
            continue
        values[p] = rep.index if rep.diagnostics.get("converged") else None
    good = {p: v for p, v in values.items() if v is not None}
    if len(good) < 2:
        return ProbeResult("inconclusive", values)
    if len(set(good.values())) == 1:
        return ProbeResult("stable", values)
    ps = sorted(good)
    cand = None
    for p0, p1 in zip(ps[:-1], ps[1:]):
        if good[p0] != good[p1]:
            cand = 0.5 * (p0 + p1)
            break
    return ProbeResult("jump_detected", values, cand)


def sturm_zero_count(lambda1: float, tau0: float) -> int:
    """Zeros in ``(0, tau0]`` of ``c'' = (3/8 tanh^2(sqrt2 tau/2) - 1/4 + lambda1) c``, ``c(0)=0, c'(0)=1``."""
    s2 = math.sqrt(2.0)

    def rhs(t, y):
        return [y[1], (0.375 * math.tanh(s2 * t / 2.0) ** 2 - 0.25 + lambda1) * y[0]]

    sol = solve_ivp(rhs, (0.0, tau0), [0.0, 1.0], method="DOP853", rtol=1e-11, atol=1e-12, dense_output=True)
    ts = np.linspace(0.0, tau0, 20001)[1:]
    c = sol.sol(ts)[0]
    return int(np.sum(np.sign(c[:-1]) * np.sign(c[1:]) < 0))


def determinant_trace(problem: HalfClinicProblem, n: int = 2001) -> ZeroTrace:
    """Samples of ``det(Z1^T J Z(tau))`` along the transported frame.

    ``Z1`` is the reference ``V1`` and ``Z(tau)`` the frame of the problem's
    path; the zeros are the crossings counted by the index.
    """
    path, target = _transport(problem, problem.horizon)
    Z1 = orthonormalize(as_columns(problem.V1))
    J = standard_J(Z1.shape[1])
    a, b = path.interval
    ts = np.linspace(a, b, n)
    vals = np.array([np.linalg.det(Z1.T @ J @ path.frame(t)) for t in ts])
    zeros = [float(0.5 * (ts[i] + ts[i + 1])) for i in range(n - 1) if vals[i] * vals[i + 1] < 0]
    converged = True
    if target is not None:
        converged = _settled(path, target, problem.window, problem.convergence_tol)[0]
    return ZeroTrace(ts, vals, zeros, [], converged, "settled" if converged else "growing", ts)


def unstable_frame(cfg: CentralConfig, orbit: str = "lplus", tau: float = 0.0, T_max: Optional[float] = None,
                   **kw) -> np.ndarray:
    """Orthonormal frame of ``V_u(tau)``, transported from the equilibrium at ``-T_max``."""
    T = default_T_max(cfg) if T_max is None else float(T_max)
    start = _ENDS[orbit][0]
    seed = equilibrium_data(cfg, start).V_u.columns
    path = LagrangianPath.from_flow(orbit_generator(orbit, cfg), seed, (-T, tau), **kw)
    return path.final_frame
