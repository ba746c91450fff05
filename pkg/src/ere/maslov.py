"""Maslov index of Lagrangian paths.

The index is evaluated as a spectral flow.  For orthonormal frames
``Z = [X; Y]`` of a path and ``W = [Xw; Yw]`` of the reference, put
``U = X + iY``, ``Uw = Xw + iYw`` and ``C = Uw^* U``.  The symmetric unitary
matrix ``C C^T`` does not depend on the frame gauge, and its eigenvalue 1
has multiplicity ``dim(Lambda(t) n W)``.  Positive crossings push
eigenphases upward through 0 (mod 2 pi), so lifting the eigenphases
continuously and counting level changes

    index = sum_j ceil(theta_j(b) / 2 pi) - ceil(theta_j(a) / 2 pi)

yields m+ at the start, the signatures of interior crossings and -m- at the
end.  Tangential touches cancel in the count.  Every level change is still
localized in time and the crossing form is evaluated there, so the report
lists each crossing with its inertia.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, logm
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, ConvergenceError, MalformedInputError, NoCrossingError
from .symplectic import (
    LagrangianFrame,
    as_columns,
    doubled_generator,
    graph_embed,
    intersection_dim,
    orthonormalize,
    standard_J,
    to_standard,
)

TWO_PI = 2.0 * np.pi

#: eigenphases closer than this to a multiple of 2 pi count as a crossing at an endpoint
ENDPOINT_TOL = 1e-6
#: largest admissible eigenphase increment between neighbouring samples
MAX_PHASE_STEP = 0.5
#: relative tolerance for deciding that a crossing-form eigenvalue vanishes
FORM_TOL = 1e-7


@dataclass(frozen=True)
class CrossingRecord:
    time: float
    kernel_dim: int
    signature: int
    m_plus: int
    m_minus: int
    regular: bool


@dataclass(frozen=True)
class CrossingForm:
    """The crossing form restricted to ``Lambda(t) n W`` in an orthonormal basis."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    m_plus: int
    m_minus: int
    kernel_dim: int

    @property
    def regular(self) -> bool:
        return self.m_plus + self.m_minus == self.kernel_dim

    @property
    def signature(self) -> int:
        return self.m_plus - self.m_minus


@dataclass
class IndexReport:
    index: int
    crossings: list = field(default_factory=list)
    endpoint_contributions: tuple = (0, 0)
    diagnostics: dict = field(default_factory=dict)

    def combination(self) -> int:
        """m+ at the first endpoint + interior signatures - m- at the second."""
        a, b = self.diagnostics.get("interval", (None, None))
        total = 0
        for rec in self.crossings:
            if rec.time == a:
                total += rec.m_plus
            elif rec.time == b:
                total -= rec.m_minus
            else:
                total += rec.signature
        return total

    @property
    def regular(self) -> bool:
        return all(rec.regular for rec in self.crossings)

    @property
    def start_kernel(self) -> int:
        return int(self.diagnostics.get("start_kernel", 0))

    @property
    def end_kernel(self) -> int:
        return int(self.diagnostics.get("end_kernel", 0))


# ---------------------------------------------------------------------------
# paths


class LagrangianPath:
    """A continuous path of Lagrangian subspaces on ``[a, b]``.

    Parameters
    ----------
    evaluator
        ``t -> 2m x m`` array whose columns span ``Lambda(t)``.
    interval
        ``(a, b)`` with ``a < b``.
    generator
        Optional ``t -> B(t)`` (symmetric 2m x 2m) with
        ``Lambda(t) = gamma(t) Lambda(a)`` and ``gamma' = J B gamma``.  When it
        is absent the crossing form is obtained from a centred difference.
    nodes
        Sample times at which the path is known to be well resolved, e.g.
        the accepted steps of an integrator.
    """

    def __init__(
        self,
        evaluator: Callable[[float], np.ndarray],
        interval: tuple,
        generator: Optional[Callable[[float], np.ndarray]] = None,
        nodes: Optional[Sequence[float]] = None,
        diagnostics: Optional[dict] = None,
    ):
        a, b = float(interval[0]), float(interval[1])
        if not b > a:
            raise MalformedInputError(f"interval must satisfy a < b, got {interval}")
        self._evaluator = evaluator
        self.interval = (a, b)
        self.generator = generator
        base = np.linspace(a, b, 33)
        if nodes is not None:
            nodes = np.asarray(nodes, dtype=float)
            base = np.concatenate([base, nodes[(nodes > a) & (nodes < b)]])
        self.nodes = np.unique(base)
        self.diagnostics = dict(diagnostics or {})

    def frame(self, t: float) -> np.ndarray:
        return orthonormalize(np.asarray(self._evaluator(t), dtype=float))

    def __call__(self, t: float) -> LagrangianFrame:
        return LagrangianFrame.trusted(self.frame(t))

    @property
    def dim(self) -> int:
        return self.frame(self.interval[0]).shape[1]

    def restrict(self, a: float, b: float) -> "LagrangianPath":
        return LagrangianPath(self._evaluator, (a, b), self.generator, self.nodes, self.diagnostics)

    def form_matrix(self, t: float) -> np.ndarray:
        """Symmetric m x m matrix of the form ``-Z^T J Z'`` in the orthonormal frame Z(t)."""
        Z = self.frame(t)
        if self.generator is not None:
            B = np.asarray(self.generator(t), dtype=float)
            Q = Z.T @ B @ Z
        else:
            a, b = self.interval
            h = 1e-5 * (b - a)
            lo, hi = max(a, t - h), min(b, t + h)
            Zl = _align(self.frame(lo), Z)
            Zh = _align(self.frame(hi), Z)
            dZ = (Zh - Zl) / (hi - lo)
            Q = -Z.T @ standard_J(Z.shape[1]) @ dZ
        return 0.5 * (Q + Q.T)

    # constructors ---------------------------------------------------------

    @classmethod
    def from_flow(
        cls,
        generator: Callable[[float], np.ndarray],
        V0,
        interval: tuple,
        rtol: float = 1e-10,
        atol: float = 1e-10,
        method: str = "RK45",
    ) -> "LagrangianPath":
        """Transport ``V0`` under ``gamma' = J B gamma`` with an orthonormal frame.

        The frame obeys ``Z' = (I - Z Z^T) A Z`` with ``A = J B``, which moves
        the same subspace as ``A Z`` but keeps the columns orthonormal, so
        exponential growth along hyperbolic directions never enters.
        """
        Z0 = orthonormalize(as_columns(V0))
        n, m = Z0.shape
        J = standard_J(m)
        a, b = float(interval[0]), float(interval[1])

        def rhs(t, y):
            Z = y.reshape(n, m)
            AZ = J @ (generator(t) @ Z)
            G = Z.T @ Z
            # second term: projection; third: damping of orthonormality drift
            return (AZ - Z @ (Z.T @ AZ) - 0.5 * Z @ (G - np.eye(m))).ravel()

        sol = solve_ivp(rhs, (a, b), Z0.ravel(), method=method, rtol=rtol, atol=atol, dense_output=True)
        if sol.status != 0:
            raise ConvergenceError(f"frame transport failed at t={sol.t[-1]:.6g}: {sol.message}")
        dense = sol.sol

        def evaluator(t):
            return dense(t).reshape(n, m)

        diag = {"nfev": int(sol.nfev), "steps": int(sol.t.size), "rtol": rtol, "atol": atol, "method": method}
        path = cls(evaluator, (a, b), generator, sol.t, diag)
        path.final_frame = orthonormalize(sol.y[:, -1].reshape(n, m))
        # unnormalized end frame: depends continuously on the coefficients
        path.end_columns = sol.y[:, -1].reshape(n, m).copy()
        return path

    @classmethod
    def from_symplectic(
        cls,
        gamma: Callable[[float], np.ndarray],
        V0,
        interval: tuple,
        generator: Optional[Callable[[float], np.ndarray]] = None,
        nodes: Optional[Sequence[float]] = None,
    ) -> "LagrangianPath":
        """The path ``t -> gamma(t) V0`` for a matrix-valued function ``gamma``."""
        Z0 = as_columns(V0)
        return cls(lambda t: np.asarray(gamma(t)) @ Z0, interval, generator, nodes)

    @classmethod
    def constant_generator(cls, B: np.ndarray, V0, interval: tuple) -> "LagrangianPath":
        """``t -> exp((t - a) J B) V0`` for a constant symmetric ``B``."""
        B = np.asarray(B, dtype=float)
        A = standard_J(B.shape[0] // 2) @ B
        a = float(interval[0])
        Z0 = as_columns(V0)
        return cls(lambda t: expm((t - a) * A) @ Z0, interval, lambda t: B)


def _align(Z: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Right-multiply Z by the orthogonal matrix that best matches ``ref``."""
    u, _, vt = np.linalg.svd(Z.T @ ref)
    return Z @ (u @ vt)


# ---------------------------------------------------------------------------
# spectral flow


def _unitary(Z: np.ndarray) -> np.ndarray:
    m = Z.shape[1]
    return Z[:m] + 1j * Z[m:]


def _raw_phases(Z: np.ndarray, UwH: np.ndarray) -> np.ndarray:
    C = UwH @ _unitary(Z)
    return np.angle(np.linalg.eigvals(C @ C.T))


def _wrap(x):
    return (np.asarray(x) + np.pi) % TWO_PI - np.pi


def _follow(prev: np.ndarray, raw: np.ndarray) -> tuple:
    """Continue lifted phases ``prev`` to the raw phases ``raw`` (optimal matching)."""
    diff = _wrap(raw[None, :] - prev[:, None])
    rows, cols = linear_sum_assignment(np.abs(diff))
    step = diff[rows, cols]
    out = np.empty_like(prev)
    out[rows] = prev[rows] + step
    return out, float(np.max(np.abs(step))) if step.size else 0.0


def _level(theta: float) -> int:
    """``ceil(theta / 2 pi)`` with exact multiples of 2 pi mapped to themselves."""
    x = theta / TWO_PI
    n = round(x)
    if abs(theta - n * TWO_PI) <= 1e-12:
        return int(n)
    return int(math.ceil(x))


def _snap(theta: np.ndarray, tol: float) -> tuple:
    n = np.round(theta / TWO_PI)
    r = theta - n * TWO_PI
    hit = np.abs(r) < tol
    out = np.where(hit, n * TWO_PI, theta)
    return out, hit


@dataclass
class _Flow:
    times: list
    phases: list  # lifted phase vectors, same order as times


def _trace_flow(path: LagrangianPath, UwH: np.ndarray, endpoint_tol: float, max_step: float) -> _Flow:
    a, b = path.interval
    nodes = path.nodes
    min_dt = 1e-13 * (b - a)

    cache = {}

    def raw(t):
        if t not in cache:
            cache[t] = _raw_phases(path.frame(t), UwH)
        return cache[t]

    th0, _ = _snap(raw(a), endpoint_tol)
    times = [a]
    phases = [th0]
    stack = list(nodes[::-1][:-1])  # upcoming times, popped from the end
    warned = False
    while stack:
        t1 = stack.pop()
        t0 = times[-1]
        new, jump = _follow(phases[-1], raw(t1))
        if jump > max_step and (t1 - t0) > min_dt:
            stack.append(t1)
            stack.append(0.5 * (t0 + t1))
            continue
        if jump > max_step and not warned:
            warnings.warn(f"eigenphase step {jump:.3f} rad unresolved near t={t0:.6g}", RuntimeWarning)
            warned = True
        times.append(t1)
        phases.append(new)
    last, _ = _snap(phases[-1], endpoint_tol)
    phases[-1] = last
    return _Flow(times, phases)


def _localize(path, UwH, t0, t1, th0, th1, j, time_tol):
    """Bisection for the time at which branch j changes level inside (t0, t1)."""
    target = _level(th0[j])
    lo, hi, thlo = t0, t1, th0
    while hi - lo > time_tol:
        mid = 0.5 * (lo + hi)
        thm, _ = _follow(thlo, _raw_phases(path.frame(mid), UwH))
        if _level(thm[j]) == target:
            lo, thlo = mid, thm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def count_intersection(Z: np.ndarray, W: np.ndarray, tol: float = ENDPOINT_TOL) -> int:
    """``dim(span Z n span W)`` for Lagrangian frames, from the eigenphases near 0."""
    Z = orthonormalize(as_columns(Z))
    Zw = orthonormalize(as_columns(W))
    th = _wrap(_raw_phases(Z, _unitary(Zw).conj().T))
    return int(np.sum(np.abs(th) < tol))


def crossing_form(path: LagrangianPath, W, t: float, kernel_tol: float = ENDPOINT_TOL) -> CrossingForm:
    """Crossing form of ``path`` against ``W`` at time ``t``.

    The intersection is detected from the eigenphases of ``C C^T`` that lie
    within ``kernel_tol`` of 0 (mod 2 pi); its basis comes from the smallest
    right singular vectors of ``(I - P_W) Z``.
    """
    Zw = orthonormalize(as_columns(W))
    Z = path.frame(t)
    th = _wrap(_raw_phases(Z, _unitary(Zw).conj().T))
    kdim = int(np.sum(np.abs(th) < kernel_tol))
    if kdim == 0:
        raise NoCrossingError(f"Lambda({t:.6g}) is transversal to W")
    _, _, vt = np.linalg.svd(Z - Zw @ (Zw.T @ Z))
    basis = vt[-kdim:].T
    Q = basis.T @ path.form_matrix(t) @ basis
    Q = 0.5 * (Q + Q.T)
    ev = np.linalg.eigvalsh(Q)
    scale = FORM_TOL * max(1.0, np.linalg.norm(path.form_matrix(t), 2))
    return CrossingForm(Q, ev, int(np.sum(ev > scale)), int(np.sum(ev < -scale)), kdim)


def maslov_index(
    path: LagrangianPath,
    W,
    endpoint_tol: float = ENDPOINT_TOL,
    max_step: float = MAX_PHASE_STEP,
    localize: bool = True,
) -> IndexReport:
    """Maslov index ``mu(W, Lambda)`` with the m+ / -m- endpoint convention."""
    a, b = path.interval
    Zw = orthonormalize(as_columns(W))
    if Zw.shape[0] != 2 * path.dim:
        raise MalformedInputError("reference frame and path live in different spaces")
    UwH = _unitary(Zw).conj().T
    flow = _trace_flow(path, UwH, endpoint_tol, max_step)
    times, phases = flow.times, flow.phases
    m = phases[0].size

    levels = np.array([[_level(x) for x in th] for th in phases])
    count = int(np.sum(levels[-1] - levels[0]))

    at_a = np.array([abs(x - TWO_PI * round(x / TWO_PI)) == 0.0 for x in phases[0]])
    at_b = np.array([abs(x - TWO_PI * round(x / TWO_PI)) == 0.0 for x in phases[-1]])

    # level changes, attributed to endpoints when they belong to a branch
    # leaving (entering) an intersection at a (b)
    time_tol = 1e-10 * (b - a)
    events = []  # (time, +1/-1, where)
    n_int = len(times) - 1
    first_change = {}
    last_change = {}
    for i in range(n_int):
        d = levels[i + 1] - levels[i]
        for j in np.nonzero(d)[0]:
            first_change.setdefault(j, i)
            last_change[j] = i
    start_up = 0
    end_down = 0
    for i in range(n_int):
        d = levels[i + 1] - levels[i]
        for j in np.nonzero(d)[0]:
            step = int(np.sign(d[j]))
            for _ in range(abs(int(d[j]))):
                if i == 0 and at_a[j] and first_change[j] == 0 and step > 0:
                    start_up += 1
                    continue
                if i == n_int - 1 and at_b[j] and last_change[j] == n_int - 1 and step < 0:
                    end_down += 1
                    continue
                if localize:
                    tc = _localize(path, UwH, times[i], times[i + 1], phases[i], phases[i + 1], j, time_tol)
                else:
                    tc = 0.5 * (times[i] + times[i + 1])
                events.append((tc, step))

    interior = sum(s for _, s in events)
    index = start_up + interior - end_down
    if index != count:  # pragma: no cover - would indicate a bookkeeping bug
        raise AssertionError(f"crossing bookkeeping mismatch: {index} != {count}")

    crossings = []
    diagnostics = {"interval": (a, b), "samples": len(times), "level_count": count}

    def direction(k_idx):
        return phases[1][k_idx] - phases[0][k_idx] if len(phases) > 1 else 0.0

    start_kernel = int(np.sum(at_a))
    end_kernel = int(np.sum(at_b))
    diagnostics["start_kernel"] = start_kernel
    diagnostics["end_kernel"] = end_kernel

    if start_kernel:
        down = int(sum(1 for j in np.nonzero(at_a)[0] if direction(j) < -1e-12))
        crossings.append(_record(path, Zw, a, start_kernel, start_up, down))
    # cluster interior events
    events.sort()
    cluster_tol = 1e-8 * (b - a)
    groups = []
    for tc, s in events:
        if groups and tc - groups[-1][-1][0] <= cluster_tol:
            groups[-1].append((tc, s))
        else:
            groups.append([(tc, s)])
    for g in groups:
        tc = float(np.mean([x for x, _ in g]))
        ups = sum(1 for _, s in g if s > 0)
        downs = sum(1 for _, s in g if s < 0)
        crossings.append(_record(path, Zw, tc, ups + downs, ups, downs))
    if end_kernel:
        up_end = int(
            sum(1 for j in np.nonzero(at_b)[0] if phases[-1][j] - phases[-2][j] > 1e-12)
        ) if len(phases) > 1 else 0
        crossings.append(_record(path, Zw, b, end_kernel, up_end, end_down))

    report = IndexReport(index, crossings, (start_up, -end_down), diagnostics)
    diagnostics["irregular"] = sum(1 for r in crossings if not r.regular)
    return report


def _record(path, Zw, t, kernel_guess, ups, downs) -> CrossingRecord:
    """Crossing record whose inertia comes from the form when it is regular
    and consistent with the spectral flow, and from the flow otherwise."""
    try:
        form = crossing_form(path, Zw, t, kernel_tol=max(ENDPOINT_TOL, 1e-4))
    except NoCrossingError:
        form = None
    if form is not None and form.regular and (form.m_plus, form.m_minus) == (ups, downs):
        return CrossingRecord(t, form.kernel_dim, form.signature, form.m_plus, form.m_minus, True)
    kdim = max(kernel_guess, ups + downs, form.kernel_dim if form is not None else 0)
    return CrossingRecord(t, kdim, ups - downs, ups, downs, False)


def maslov_rs(path: LagrangianPath, W, **kwargs) -> float:
    """Half-weighted endpoint variant: 1/2 sign at both ends plus interior signatures."""
    rep = maslov_index(path, W, **kwargs)
    a, b = path.interval
    total = 0.0
    for rec in rep.crossings:
        if rec.time == a or rec.time == b:
            total += 0.5 * (rec.m_plus - rec.m_minus)
        else:
            total += rec.signature
    return total


# ---------------------------------------------------------------------------
# Hormander index


def _graph_matrix(Z: np.ndarray):
    """Symmetric A with span(Z) = {(x, A x)}, plus the conditioning of X."""
    m = Z.shape[1]
    X, Y = Z[:m], Z[m:]
    c = np.linalg.cond(X)
    if not np.isfinite(c) or c > 1e12:
        return None, np.inf
    A = Y @ np.linalg.inv(X)
    return 0.5 * (A + A.T), c


def _signature(A: np.ndarray) -> int:
    ev = np.linalg.eigvalsh(A)
    tol = 1e-10 * max(1.0, np.max(np.abs(ev)))
    return int(np.sum(ev > tol) - np.sum(ev < -tol))


def _unitary_rotation(k: int, H: np.ndarray) -> np.ndarray:
    """Real symplectic orthogonal matrix representing exp(i H) for Hermitian H."""
    Hr, Hi = H.real, H.imag
    Hreal = np.block([[Hr, -Hi], [Hi, Hr]])
    return expm(standard_J(k) @ Hreal)


def connecting_path(L0, L1) -> LagrangianPath:
    """A path from L0 to L1 along a one-parameter unitary subgroup."""
    Z0 = orthonormalize(as_columns(L0))
    Z1 = orthonormalize(as_columns(L1))
    k = Z0.shape[1]
    U0, U1 = _unitary(Z0), _unitary(Z1)
    # exp(i H) U0 spans L1 for H = -i log(U1 U0^*)
    H = -1j * logm(U1 @ U0.conj().T)
    H = 0.5 * (H + H.conj().T)
    B = np.block([[H.real, -H.imag], [H.imag, H.real]])
    return LagrangianPath.constant_generator(B, Z0, (0.0, 1.0))


def hormander_index(V0, V1, L0, L1, method: str = "auto", cond_max: float = 1e8) -> int:
    """``s(V0, V1; L0, L1) = mu(V0, Lambda) - mu(V1, Lambda)`` for any path Lambda from L0 to L1.

    With ``method='auto'`` the signature formula over a common graph
    splitting is tried first; the path difference is used when no
    well-conditioned splitting is found among a few symplectic rotations.
    """
    frames = [orthonormalize(as_columns(F)) for F in (V0, V1, L0, L1)]
    k = frames[0].shape[1]
    # The signature formula matches the m+/-m- endpoint convention only when
    # the reference subspaces are transversal to both endpoints.
    transversal = all(intersection_dim(V, L) == 0 for V in frames[:2] for L in frames[2:])
    if method == "formula" and not transversal:
        raise ConfigurationError("signature formula needs V0, V1 transversal to L0, L1")
    if method in ("auto", "formula") and transversal:
        rng = np.random.default_rng(12345)
        rotations = [np.eye(2 * k)]
        for th in (0.37, 0.81, 1.29):
            rotations.append(_unitary_rotation(k, th * np.eye(k)))
        for _ in range(6):
            G = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
            rotations.append(_unitary_rotation(k, 0.5 * (G + G.conj().T)))
        for Rm in rotations:
            mats = []
            ok = True
            for Z in frames:
                A, c = _graph_matrix(Rm @ Z)
                if A is None or c > cond_max:
                    ok = False
                    break
                mats.append(A)
            if ok:
                A0, A1, B0, B1 = mats
                twice = _signature(B0 - A1) + _signature(B1 - A0) - _signature(B1 - A1) - _signature(B0 - A0)
                return twice // 2
        if method == "formula":
            raise ConfigurationError("no well-conditioned common graph splitting found")
    path = connecting_path(frames[2], frames[3])
    return maslov_index(path, frames[0]).index - maslov_index(path, frames[1]).index


# ---------------------------------------------------------------------------
# Maslov-type indices i_1 and i_-1


@dataclass
class PM1Result:
    i1: int
    im1: int
    nu1: int
    num1: int
    reports: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.i1
        yield self.im1

    @property
    def degenerate(self) -> bool:
        return self.nu1 > 0 or self.num1 > 0


def graph_path(generator, interval, k, rtol=1e-10, atol=1e-10, method="RK45") -> LagrangianPath:
    """Path ``t -> Gr(gamma(t))`` in standard coordinates of R^4k, with gamma(a) = I."""
    I = np.eye(2 * k)
    Z0 = to_standard(graph_embed(I)).columns
    return LagrangianPath.from_flow(lambda t: doubled_generator(generator(t)), Z0, interval, rtol, atol, method)


def index_pm1(gamma, rtol: Optional[float] = None, atol: Optional[float] = None, path: Optional[LagrangianPath] = None) -> PM1Result:
    """``i_1 = mu(Delta, Gr gamma) - k`` and ``i_-1 = mu(Gr(-I), Gr gamma)``.

    ``gamma`` is any object exposing ``generator``, ``interval`` and ``k``
    (e.g. :class:`ere.flow.FundamentalPath`); the graph path is transported
    afresh with an orthonormal frame for numerical robustness.
    """
    k = gamma.k
    if path is None:
        tol = getattr(gamma, "tolerances", (1e-10, 1e-10))
        path = graph_path(
            gamma.generator,
            gamma.interval,
            k,
            rtol if rtol is not None else tol[1],
            atol if atol is not None else tol[0],
            getattr(gamma, "method", "RK45"),
        )
    I = np.eye(2 * k)
    delta = to_standard(graph_embed(I))
    anti = to_standard(graph_embed(I, sign=-1))
    r1 = maslov_index(path, delta)
    rm1 = maslov_index(path, anti)
    return PM1Result(r1.index - k, rm1.index, r1.end_kernel, rm1.end_kernel, {"1": r1, "-1": rm1})
