"""Central-configuration data and the coefficient systems built from it.

The essential part of the linearized elliptic relative equilibrium is the
linear Hamiltonian system ``z' = J B(t) z`` on R^2k with

    B(t) = [[I, -JJ], [JJ, I - R / (1 + e cos t)]],

where ``JJ = diag(J2, ..., J2)`` and ``R`` is the regularized Hessian of the
central configuration.  The blow-up variables ``q = (1 + e cos t)^(1/2)``,
``Q = e sin t / q`` and time ``d tau = dt / q`` turn this into
``z' = J Bhat(q, Q) z`` with

    Bhat = [[I, (Q/4) I - q JJ], [(Q/4) I + q JJ, q^2 I - R]],

which stays regular as ``e -> 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, MalformedInputError, NonHyperbolicError, SymmetryError, UnsupportedDimensionError
from .symplectic import LagrangianFrame, complex_structure, standard_J

SQRT2 = math.sqrt(2.0)
#: 1+3-gon central mass at which lambda_-(m_c) vanishes
RING3_MC_ZERO = math.sqrt(3.0) / 24.0
#: 1+3-gon central mass at which lambda_-(m_c) = -1
RING3_MC_MINUS_ONE = (81.0 + 64.0 * math.sqrt(3.0)) / 249.0

FAMILIES = ("euler", "lagrange", "ring3", "custom")


@dataclass(frozen=True)
class CentralConfig:
    """Regularized Hessian ``R`` with an optional brake-symmetry matrix ``N``."""

    R: np.ndarray
    N: Optional[np.ndarray] = None
    family: str = "custom"
    param: Optional[float] = None
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        R = np.atleast_2d(np.array(self.R, dtype=float))
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise MalformedInputError(f"R must be square, got shape {R.shape}")
        if R.shape[0] % 2 and self.family != "custom":
            raise MalformedInputError("R must have even size (the planar structure JJ pairs coordinates)")
        if np.max(np.abs(R - R.T), initial=0.0) > 1e-12:
            raise MalformedInputError("R is not symmetric")
        R = 0.5 * (R + R.T)
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        if self.N is not None:
            N = np.array(self.N, dtype=float)
            k = R.shape[0]
            if N.shape != (k, k):
                raise SymmetryError(f"N must be {k}x{k}")
            JJ = complex_structure(k)
            checks = {
                "N^2 - I": np.linalg.norm(N @ N - np.eye(k)),
                "N JJ + JJ N": np.linalg.norm(N @ JJ + JJ @ N),
                "RN - NR": np.linalg.norm(R @ N - N @ R),
                "N - N^T": np.linalg.norm(N - N.T),
            }
            bad = {key: v for key, v in checks.items() if v >= 1e-10}
            if bad:
                raise SymmetryError(f"invalid brake symmetry: {bad}")
            N.setflags(write=False)
            object.__setattr__(self, "N", N)
        ev = np.linalg.eigvalsh(R)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def k(self) -> int:
        return self.R.shape[0]

    @property
    def planar(self) -> bool:
        """Even size: the coupling ``JJ`` exists.  Odd sizes only make sense on ``q = 0``."""
        return self.k % 2 == 0

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def morse_index(self) -> int:
        """phi(R): number of negative eigenvalues."""
        return int(np.sum(self.eigenvalues < -1e-12))

    @property
    def nondegenerate(self) -> bool:
        return bool(np.all(np.abs(self.eigenvalues) > 1e-12))

    @property
    def hyperbolic_equilibria(self) -> bool:
        return self.lambda1 > -0.125

    @property
    def eta(self) -> np.ndarray:
        """Equilibrium exponents ``sqrt(1/8 + lambda_j)`` (hyperbolic case)."""
        if not self.hyperbolic_equilibria:
            raise NonHyperbolicError(
                f"lambda_1(R) = {self.lambda1:.6g} <= -1/8: the equilibria P+/P- are not hyperbolic"
            )
        return np.sqrt(0.125 + self.eigenvalues)

    def label(self) -> str:
        if self.param is None:
            return self.family
        return f"{self.family}({self.param:g})"


def ring3_lambda(m_c: float) -> tuple:
    """The eigenvalues (lambda_+, lambda_-) of the 1+3-gon block D_-+."""
    s3 = math.sqrt(3.0)
    root = math.sqrt(27.0 * (m_c ** 2 + 3.0 * m_c) + ((3.0 * s3 - 1.0) / 2.0) ** 2)
    base = s3 * m_c + (3.0 * s3 + 1.0) / 2.0
    den = 2.0 * (1.0 + s3 * m_c)
    return (base + root) / den, (base - root) / den


def ring3_D(m_c: float) -> np.ndarray:
    s3 = math.sqrt(3.0)
    den = 2.0 * (1.0 + s3 * m_c)
    c = 3.0 * math.sqrt(3.0 * m_c * (3.0 + m_c)) / den
    s = s3 * (3.0 + m_c) / den
    D = np.diag([0.5, 0.5, s, s])
    D[0, 2] = D[2, 0] = -c
    D[1, 3] = D[3, 1] = c
    return D


def build_config(family: str, param: Optional[float] = None, R=None, N=None) -> CentralConfig:
    """Central configuration of a named family.

    ``euler``: ``R = diag(-delta, 2 delta + 3)``, ``delta >= 0``.
    ``lagrange``: ``R = diag((3 +- sqrt(9 - beta)) / 2)``, ``0 < beta <= 9``.
    ``ring3``: ``R = I + D(m_c)`` for the 1+3-gon with central mass ``m_c >= 0``.
    ``custom``: explicit ``R`` and optional ``N``.
    """
    family = family.lower().replace("-", "_")
    if family == "euler":
        d = _require_param(family, param)
        if not (d >= 0 and math.isfinite(d)):
            raise DomainError(f"euler needs delta >= 0, got {d}")
        return CentralConfig(np.diag([-d, 2 * d + 3]), np.diag([1.0, -1.0]), "euler", d)
    if family == "lagrange":
        b = _require_param(family, param)
        if not (0 < b <= 9):
            raise DomainError(f"lagrange needs 0 < beta <= 9, got {b}")
        r = math.sqrt(9.0 - b)
        return CentralConfig(np.diag([(3 + r) / 2, (3 - r) / 2]), np.diag([1.0, -1.0]), "lagrange", b)
    if family == "ring3":
        m = _require_param(family, param)
        if not (m >= 0 and math.isfinite(m)):
            raise DomainError(f"ring3 needs m_c >= 0, got {m}")
        return CentralConfig(np.eye(4) + ring3_D(m), np.diag([1.0, -1.0, 1.0, -1.0]), "ring3", m)
    if family == "custom":
        if R is None:
            raise DomainError("custom family needs an explicit R")
        return CentralConfig(R, N, "custom", param)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _require_param(family, param) -> float:
    if param is None:
        raise DomainError(f"family {family} needs a parameter")
    return float(param)


# ---------------------------------------------------------------------------
# coefficient paths


def essential_B(t: float, cfg: CentralConfig, e: float) -> np.ndarray:
    """Coefficient matrix of the essential part in true anomaly ``t``."""
    if not 0 <= e < 1:
        raise DomainError(f"true-anomaly coefficients need 0 <= e < 1, got {e}")
    k = cfg.k
    I = np.eye(k)
    JJ = complex_structure(k)
    return np.block([[I, -JJ], [JJ, I - cfg.R / (1.0 + e * math.cos(t))]])


@dataclass(frozen=True)
class SturmCoefficients:
    """``-(P y' + Q y)' + Q^T y' + V(t) y = 0`` with ``P = I``, ``Q = JJ``."""

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    e: float

    def potential(self, t: float) -> np.ndarray:
        return self.R / (1.0 + self.e * math.cos(t))

    def hamiltonian(self, t: float) -> np.ndarray:
        """The associated linear Hamiltonian coefficient matrix."""
        Pi = np.linalg.inv(self.P)
        Q = self.Q
        return np.block([[Pi, -Pi @ Q], [-Q.T @ Pi, Q.T @ Pi @ Q - self.potential(t)]])


def sturm_coeffs(cfg: CentralConfig, e: float) -> SturmCoefficients:
    if not 0 <= e < 1:
        raise DomainError(f"need 0 <= e < 1, got {e}")
    k = cfg.k
    return SturmCoefficients(np.eye(k), complex_structure(k), cfg.R, float(e))


# ---------------------------------------------------------------------------
# blow-up phase plane


@dataclass(frozen=True)
class BlowUpPoint:
    q: float
    Q: float

    @property
    def energy(self) -> float:
        return self.q ** 2 * (0.5 * self.Q ** 2 + 0.5 * self.q ** 2 - 1.0)


def blowup_rhs(p: BlowUpPoint) -> tuple:
    """``(q', Q') = (-q Q / 2, Q^2 / 2 + q^2 - 1)``."""
    return (-0.5 * p.q * p.Q, 0.5 * p.Q ** 2 + p.q ** 2 - 1.0)


P_PLUS = BlowUpPoint(0.0, SQRT2)
P_MINUS = BlowUpPoint(0.0, -SQRT2)


def heteroclinic(side: str, tau: float) -> BlowUpPoint:
    """Point at time ``tau`` on the collision orbit ``l0`` or on ``l+``.

    ``l0`` runs inside the collision manifold from P+ to P-; ``l+`` leaves
    P- and reaches P+ through ``q > 0``.
    """
    x = SQRT2 * tau / 2.0
    if side in ("l0", "l_0"):
        return BlowUpPoint(0.0, -SQRT2 * math.tanh(x))
    if side in ("lplus", "l+", "l_plus"):
        return BlowUpPoint(SQRT2 / math.cosh(x), SQRT2 * math.tanh(x))
    raise DomainError(f"unknown heteroclinic {side!r}; expected 'l0' or 'lplus'")


def hat_B(point: BlowUpPoint, cfg: CentralConfig) -> np.ndarray:
    return hat_B_qQ(point.q, point.Q, cfg)


def hat_B_qQ(q: float, Q: float, cfg: CentralConfig) -> np.ndarray:
    k = cfg.k
    I = np.eye(k)
    if q == 0.0:
        # collision manifold: no rotational coupling, odd sizes allowed
        return np.block([[I, 0.25 * Q * I], [0.25 * Q * I, -cfg.R]])
    if not cfg.planar:
        raise UnsupportedDimensionError(f"odd size k={k} is only defined on the collision manifold q = 0")
    JJ = complex_structure(k)
    return np.block([[I, 0.25 * Q * I - q * JJ], [0.25 * Q * I + q * JJ, q * q * I - cfg.R]])


def orbit_initialization(e: float, origin: float = 0.0) -> tuple:
    """Blow-up point at true anomaly ``origin`` and the value ``e_hat = (1 - e^2)/2``."""
    if not 0 <= e < 1:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    q = math.sqrt(1.0 + e * math.cos(origin))
    s = math.sin(origin)
    if abs(s) < 1e-15:
        s = 0.0
    return BlowUpPoint(q, e * s / q), 0.5 * (1.0 - e * e)


# ---------------------------------------------------------------------------
# equilibria


@dataclass(frozen=True)
class EquilibriumData:
    sign: int
    D: np.ndarray
    eta: np.ndarray
    V_u: LagrangianFrame
    V_s: LagrangianFrame
    P_diag: np.ndarray
    hyperbolic: bool


def equilibrium_data(cfg: CentralConfig, sign: int) -> EquilibriumData:
    """Linearization ``D = J Bhat(P+-)`` with its unstable and stable Lagrangians.

    In an orthonormal eigenbasis ``o_j`` of ``R`` the system splits into
    planar blocks with exponents ``+-eta_j``; the eigenvectors are
    ``(c o_j, o_j)`` with ``c = -sign * sqrt(2)/4 +- eta_j``.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 (P+) or -1 (P-)")
    k = cfg.k
    p = P_PLUS if sign > 0 else P_MINUS
    D = standard_J(k) @ hat_B(p, cfg)
    eta = cfg.eta  # raises for non-hyperbolic configurations
    ev, O = np.linalg.eigh(cfg.R)
    base = -sign * SQRT2 / 4.0
    Vu = np.vstack([O * (base + eta), O])
    Vs = np.vstack([O * (base - eta), O])
    P = np.hstack([Vu, Vs])
    return EquilibriumData(sign, D, eta, LagrangianFrame(Vu), LagrangianFrame(Vs), P, True)
