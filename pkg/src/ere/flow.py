"""Fundamental solutions, monodromy matrices and spectral classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DomainError
from .maslov import LagrangianPath, count_intersection
from .models import CentralConfig, essential_B, hat_B_qQ, orbit_initialization
from .symplectic import (
    _doubled_to_standard_matrix,
    orthonormalize,
    standard_J,
    symplectic_correction,
    symplectic_residual,
)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10
DEFAULT_METHOD = "DOP853"
RENORMALIZE_AT = 1e-9
#: below this value of 1 - e the true-anomaly domain is replaced by blow-up time
TAU_DOMAIN_THRESHOLD = 1e-3
#: anomaly at which integration starts; pi puts the collision-like pericentre
#: passage (q minimal) at the start of the period
DEFAULT_ORIGIN = math.pi


@dataclass
class _Segment:
    t0: float
    t1: float
    dense: object
    left: np.ndarray  # gamma(t0)


@dataclass
class FundamentalPath:
    """Fundamental solution ``gamma' = J B gamma`` with ``gamma(a) = I``.

    ``gamma`` is stored as a chain of segment propagators, each integrated
    from the identity, so that ``gamma(t) = Phi_i(t) gamma(t_i)``.
    """

    k: int
    interval: tuple
    generator: Callable[[float], np.ndarray]
    domain: str
    tolerances: tuple
    method: str
    drift: float
    segments: list = field(repr=False)
    extras: dict = field(default_factory=dict, repr=False)

    def matrix(self, t: float) -> np.ndarray:
        a, b = self.interval
        if t < a - 1e-12 * (b - a) or t > b + 1e-12 * (b - a):
            raise DomainError(f"t={t} outside {self.interval}")
        for seg in self.segments:
            if t <= seg.t1:
                break
        n = 2 * self.k
        return seg.dense(t).reshape(n, n) @ seg.left

    __call__ = matrix

    @property
    def monodromy(self) -> np.ndarray:
        return self.extras["end"]

    @property
    def samples(self) -> list:
        out = [(self.interval[0], np.eye(2 * self.k))]
        n = 2 * self.k
        for seg in self.segments:
            for t in seg.dense.ts[1:]:
                out.append((float(t), seg.dense(t).reshape(n, n) @ seg.left))
        return out

    def propagator(self, t: float, s: float) -> np.ndarray:
        """``gamma(t, s) = gamma(t) gamma(s)^{-1}`` (symplectic inverse)."""
        J = standard_J(self.k)
        gs = self.matrix(s)
        return self.matrix(t) @ (-J @ gs.T @ J)

    def lagrangian_path(self, V0) -> LagrangianPath:
        """Transport ``V0`` with an orthonormal frame along the same coefficients."""
        rtol, atol = self.tolerances[1], self.tolerances[0]
        return LagrangianPath.from_flow(self.generator, V0, self.interval, rtol, atol, self.method)


def integrate_fundamental(
    generator: Callable[[float], np.ndarray],
    interval: tuple,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
    segments: int = 8,
    domain: str = "custom",
) -> FundamentalPath:
    """Integrate ``gamma' = J B(t) gamma`` from the identity.

    The interval is cut into ``segments`` pieces integrated from the
    identity; each piece's end propagator is pulled back onto Sp(2k) when
    its relative symplecticity defect exceeds ``1e-9``.
    """
    a, b = float(interval[0]), float(interval[1])
    B0 = np.asarray(generator(a))
    n = B0.shape[0]
    k = n // 2
    J = standard_J(k)

    def rhs(t, y):
        return (J @ (generator(t) @ y.reshape(n, n))).ravel()

    edges = np.linspace(a, b, max(1, int(segments)) + 1)
    left = np.eye(n)
    segs = []
    drift = 0.0
    nfev = 0
    for t0, t1 in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (t0, t1), np.eye(n).ravel(), method=method, rtol=rtol, atol=atol, dense_output=True)
        if sol.status != 0:
            raise ConvergenceError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
        nfev += sol.nfev
        phi = sol.y[:, -1].reshape(n, n)
        res = symplectic_residual(phi)
        if res > RENORMALIZE_AT:
            phi = symplectic_correction(phi)
            res = symplectic_residual(phi)
        drift = max(drift, res)
        segs.append(_Segment(t0, t1, sol.sol, left))
        left = phi @ left
    drift = max(drift, symplectic_residual(left))
    extras = {"end": left, "nfev": nfev}
    return FundamentalPath(k, (a, b), generator, domain, (atol, rtol), method, drift, segs, extras)


# ---------------------------------------------------------------------------
# classification


CLASSES = ("hyperbolic", "elliptic", "elliptic_hyperbolic", "spectrally_stable_degenerate")


@dataclass
class MonodromyReport:
    M: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    candidates: tuple
    tr1: Optional[float]
    tr2: Optional[float]
    det_residuals: tuple
    degenerate: bool = False
    nu: tuple = (0, 0)

    @property
    def hyperbolic(self) -> bool:
        return self.classification == "hyperbolic"


def classify(
    M: np.ndarray,
    unit_tol: float = 1e-7,
    jordan_tol: float = 1e-6,
    kernel_tol: float = 1e-6,
) -> MonodromyReport:
    """Spectral type of a symplectic matrix.

    Eigenvalues with ``| |lambda| - 1 | < unit_tol`` count as lying on the
    unit circle.  Eigenvalues at +1 or -1 are Jordan ambiguous: a nontrivial
    block splits by roughly the square root of the rounding level, far
    outside any fixed band.  Their number is therefore read off from
    ``dim Gr(M) n Gr(+-I)`` (eigenphase count, well conditioned), rounded up
    to the even algebraic multiplicity, and the corresponding eigenvalues
    closest to +-1 are reported as degenerate.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    lam = np.linalg.eigvals(M)
    lam = lam[np.lexsort((lam.imag, lam.real))]
    on = np.abs(np.abs(lam) - 1.0) < unit_tol
    ambiguous = (np.abs(lam - 1.0) < jordan_tol) | (np.abs(lam + 1.0) < jordan_tol)
    nu = {}
    for s in (1, -1):
        nu[s] = graph_kernel_dim(M, s, kernel_tol)
        count = nu[s] + (nu[s] % 2)
        if count:
            order = np.argsort(np.abs(lam - s))
            ambiguous[order[:count]] = True
    off = ~on & ~ambiguous
    if ambiguous.any():
        if off.any():
            cls, cand = "elliptic_hyperbolic", ("elliptic_hyperbolic", "hyperbolic")
        else:
            cls, cand = "spectrally_stable_degenerate", ("elliptic", "elliptic_hyperbolic")
    elif on.all():
        cls, cand = "elliptic", ("elliptic",)
    elif not on.any():
        cls, cand = "hyperbolic", ("hyperbolic",)
    else:
        cls, cand = "elliptic_hyperbolic", ("elliptic_hyperbolic",)
    tr1 = tr2 = None
    if n == 4:
        # x^2 - a x + (b - 2) with a = tr M and b = e_2(spectrum)
        a = np.sum(lam)
        b = 0.5 * (a * a - np.sum(lam * lam))
        disc = np.sqrt(complex(a * a - 4.0 * (b - 2.0)))
        r = sorted([(a + disc) / 2.0, (a - disc) / 2.0], key=lambda z: (z.real, z.imag))
        tr1, tr2 = (complex(r[0]), complex(r[1]))
        if abs(tr1.imag) < 1e-9 and abs(tr2.imag) < 1e-9:
            tr1, tr2 = tr1.real, tr2.real
    dets = (abs(float(np.prod(1.0 - lam).real)), abs(float(np.prod(-1.0 - lam).real)))
    rep = MonodromyReport(M, lam, cls, cand, tr1, tr2, dets, bool(ambiguous.any()))
    rep.nu = (nu[1], nu[-1])
    return rep


def graph_kernel_dim(M: np.ndarray, sign: int = 1, tol: float = 1e-6) -> int:
    """``dim ker(M - sign I)`` as the eigenphase multiplicity of Gr(M) against Gr(sign I)."""
    k = M.shape[0] // 2
    I = np.eye(2 * k)
    Z = _graph_columns(M)
    W = _graph_columns(sign * I)
    return count_intersection(Z, W, tol)


def _graph_columns(M: np.ndarray) -> np.ndarray:
    k = M.shape[0] // 2
    T = _doubled_to_standard_matrix(k)
    return orthonormalize(T @ np.vstack([np.eye(2 * k), M]))


# ---------------------------------------------------------------------------
# the two time domains


def true_anomaly_generator(cfg: CentralConfig, e: float) -> Callable[[float], np.ndarray]:
    if not 0 <= e < 1:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    from .symplectic import complex_structure

    k = cfg.k
    I = np.eye(k)
    JJ = complex_structure(k)
    top = np.hstack([I, -JJ])
    R = cfg.R

    def B(t):
        return np.vstack([top, np.hstack([JJ, I - R / (1.0 + e * math.cos(t))])])

    return B


def monodromy_true_anomaly(
    cfg: CentralConfig,
    e: float,
    origin: float = DEFAULT_ORIGIN,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
) -> tuple:
    """Fundamental solution over one period ``[origin, origin + 2 pi]`` and its classification."""
    gamma = integrate_fundamental(
        true_anomaly_generator(cfg, e), (origin, origin + 2 * math.pi), rtol, atol, method, domain="true_anomaly"
    )
    gamma.extras.update(cfg=cfg, e=e, origin=origin)
    return classify(gamma.monodromy), gamma


@dataclass
class BlowUpTrajectory:
    dense: object
    period: float
    e_hat: float
    energy_error: float
    origin: float

    def point(self, tau: float) -> tuple:
        y = self.dense(tau)
        return float(y[0]), float(y[1])


def blowup_trajectory(e: float, origin: float = DEFAULT_ORIGIN, rtol: float = 1e-12, atol: float = 1e-13) -> BlowUpTrajectory:
    """Integrate ``q' = -qQ/2, Q' = Q^2/2 + q^2 - 1, t' = q`` over one orbit.

    The period in blow-up time is the ``tau`` at which the accumulated true
    anomaly first advances by 2 pi.
    """
    p0, e_hat = orbit_initialization(e, origin)

    def rhs(tau, y):
        q, Q, _ = y
        return [-0.5 * q * Q, 0.5 * Q * Q + q * q - 1.0, q]

    def done(tau, y):
        return y[2] - 2 * math.pi

    done.terminal = True
    done.direction = 1
    # dt/dtau = q >= sqrt(1 - e), so tau_period <= 2 pi / sqrt(1 - e)
    tmax = 2 * math.pi / math.sqrt(max(1.0 - e, 1e-300)) * 1.05 + 1.0
    sol = solve_ivp(rhs, (0.0, tmax), [p0.q, p0.Q, 0.0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=done)
    if sol.status != 1 or not sol.t_events[0].size:
        raise ConvergenceError(f"blow-up orbit did not close for e={e}")
    T = float(sol.t_events[0][0])
    q, Q = sol.y[0], sol.y[1]
    E = q * q * (0.5 * Q * Q + 0.5 * q * q - 1.0)
    err = float(np.max(np.abs(E + e_hat)))
    return BlowUpTrajectory(sol.sol, T, e_hat, err, origin)


def blowup_flow(
    cfg: CentralConfig,
    e: float,
    origin: float = DEFAULT_ORIGIN,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
) -> tuple:
    """Fundamental solution of ``gamma_hat' = J Bhat(q(tau), Q(tau)) gamma_hat`` over one period.

    Returns ``(report, path, trajectory)``.
    """
    traj = blowup_trajectory(e, origin)
    dense = traj.dense

    def B(tau):
        y = dense(tau)
        return hat_B_qQ(y[0], y[1], cfg)

    gamma = integrate_fundamental(B, (0.0, traj.period), rtol, atol, method, domain="blowup_tau")
    gamma.extras.update(cfg=cfg, e=e, origin=origin, trajectory=traj)
    return classify(gamma.monodromy), gamma, traj


def fundamental_for(
    cfg: CentralConfig,
    e: float,
    domain: str = "auto",
    origin: float = DEFAULT_ORIGIN,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
    tau_threshold: float = TAU_DOMAIN_THRESHOLD,
) -> FundamentalPath:
    """Pick the time domain (blow-up time when ``1 - e < tau_threshold``) and integrate."""
    if domain == "auto":
        domain = "blowup_tau" if 1.0 - e < tau_threshold else "true_anomaly"
    if domain == "true_anomaly":
        return monodromy_true_anomaly(cfg, e, origin, rtol, atol, method)[1]
    if domain == "blowup_tau":
        return blowup_flow(cfg, e, origin, rtol, atol, method)[1]
    raise DomainError(f"unknown domain {domain!r}")
