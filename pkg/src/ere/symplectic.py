"""Dense linear algebra on standard symplectic spaces.

Conventions
-----------
The standard symplectic matrix is ``J = [[0, -I], [I, 0]]`` acting on
vectors ``(x, y)`` with ``x, y`` in R^k.  A Lagrangian subspace is stored as
a 2k x k column frame; frames are gauge fixed by thin orthonormalization so
that the subspace, and nothing else, is what two frames compare on.

The doubled space ``(R^2k + R^2k, -omega + omega)`` carries the form
``diag(-J, J)``.  :func:`to_standard` moves doubled frames into a standard
4k-dimensional symplectic space so that the same Maslov machinery applies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import InvalidFrameError, MalformedInputError

RANK_TOL = 1e-10
SYMP_TOL = 1e-8
ISOTROPY_TOL = 1e-8


def standard_J(k: int) -> np.ndarray:
    """Return the 2k x 2k block matrix [[0, -I_k], [I_k, 0]]."""
    if int(k) != k or k < 1:
        raise MalformedInputError(f"half dimension must be a positive integer, got {k!r}")
    k = int(k)
    J = np.zeros((2 * k, 2 * k))
    J[:k, k:] = -np.eye(k)
    J[k:, :k] = np.eye(k)
    return J


def complex_structure(k: int) -> np.ndarray:
    """Block diagonal ``kron(I_{k/2}, [[0, -1], [1, 0]])`` (k even)."""
    if k < 2 or k % 2:
        raise MalformedInputError(f"the planar complex structure needs an even size, got {k}")
    return np.kron(np.eye(k // 2), np.array([[0.0, -1.0], [1.0, 0.0]]))


def _half_dim(M: np.ndarray) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise MalformedInputError(f"expected a square matrix of even size, got shape {M.shape}")
    return M.shape[0] // 2


def symplectic_residual(M: np.ndarray) -> float:
    """Relative symplecticity defect ``||M^T J M - J|| / max(1, ||M||^2)``.

    The relative scaling keeps the measure meaningful for the badly
    conditioned monodromies that occur close to collision.
    """
    M = np.asarray(M, dtype=float)
    J = standard_J(_half_dim(M))
    scale = max(1.0, np.linalg.norm(M, 2) ** 2)
    return float(np.linalg.norm(M.T @ J @ M - J, 2) / scale)


def is_symplectic(M: np.ndarray, tol: float = SYMP_TOL) -> bool:
    return symplectic_residual(M) <= tol


def symplectic_correction(M: np.ndarray, tol: float = 1e-14, max_iter: int = 5) -> np.ndarray:
    """Pull an almost-symplectic matrix back onto Sp(2k).

    Uses the Newton-type update ``M <- M (I + J E / 2)`` with
    ``E = M^T J M - J``, which removes the defect to first order.  The
    iteration converges quadratically for small defects.
    """
    M = np.array(M, dtype=float)
    J = standard_J(_half_dim(M))
    I = np.eye(M.shape[0])
    for _ in range(max_iter):
        E = M.T @ J @ M - J
        if np.linalg.norm(E, 2) <= tol:
            break
        M = M @ (I + 0.5 * J @ E)
    return M


def symplectic_sum(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """The diamond sum of two block matrices.

    With ``Mi = [[Ai, Bi], [Ci, Di]]`` the result is
    ``[[A1, 0, B1, 0], [0, A2, 0, B2], [C1, 0, D1, 0], [0, C2, 0, D2]]``.
    """
    M1 = np.asarray(M1, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    m1, m2 = _half_dim(M1), _half_dim(M2)
    n = m1 + m2
    out = np.zeros((2 * n, 2 * n))
    i1 = np.r_[0:m1, n:n + m1]
    i2 = np.r_[m1:n, n + m1:2 * n]
    out[np.ix_(i1, i1)] = M1
    out[np.ix_(i2, i2)] = M2
    return out


def random_symplectic(k: int, rng: np.random.Generator, scale: float = 1.0, factors: int = 2) -> np.ndarray:
    """Product of exponentials ``exp(J S_i)`` with random symmetric ``S_i``."""
    J = standard_J(k)
    M = np.eye(2 * k)
    for _ in range(factors):
        S = rng.normal(scale=scale, size=(2 * k, 2 * k))
        M = M @ expm(J @ (S + S.T) / 2)
    return M


def orthonormalize(Z: np.ndarray) -> np.ndarray:
    """Thin QR with a positive diagonal of R (a unique gauge choice)."""
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def _check_rank(Z: np.ndarray, rank_tol: float) -> None:
    norms = np.linalg.norm(Z, axis=0)
    if np.any(norms == 0):
        raise InvalidFrameError("frame has a zero column")
    s = np.linalg.svd(Z / norms, compute_uv=False)
    if s[-1] <= rank_tol * s[0]:
        raise InvalidFrameError(f"frame is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3e})")


@dataclass(frozen=True)
class LagrangianFrame:
    """Orthonormal 2k x k frame of a Lagrangian subspace of (R^2k, J)."""

    columns: np.ndarray
    k: int = field(init=False)

    def __post_init__(self):
        Z = np.array(self.columns, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != 2 * Z.shape[1]:
            raise MalformedInputError(f"a Lagrangian frame must be 2k x k, got shape {Z.shape}")
        _check_rank(Z, RANK_TOL)
        Z = orthonormalize(Z)
        k = Z.shape[1]
        iso = np.linalg.norm(Z.T @ standard_J(k) @ Z, 2)
        if iso > ISOTROPY_TOL:
            raise InvalidFrameError(f"frame is not isotropic (|Z^T J Z| = {iso:.3e})")
        Z.setflags(write=False)
        object.__setattr__(self, "columns", Z)
        object.__setattr__(self, "k", k)

    @classmethod
    def trusted(cls, Z: np.ndarray) -> "LagrangianFrame":
        """Wrap an already orthonormal, isotropic frame without re-validation."""
        obj = object.__new__(cls)
        Z = np.array(Z, dtype=float)
        Z.setflags(write=False)
        object.__setattr__(obj, "columns", Z)
        object.__setattr__(obj, "k", Z.shape[1])
        return obj

    @property
    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.T

    def transform(self, M: np.ndarray) -> "LagrangianFrame":
        """Image of the subspace under a symplectic matrix."""
        return LagrangianFrame(np.asarray(M) @ self.columns)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.columns, dtype=dtype)


def dirichlet(k: int) -> LagrangianFrame:
    """V_d = R^k + 0."""
    return LagrangianFrame(np.vstack([np.eye(k), np.zeros((k, k))]))


def neumann(k: int) -> LagrangianFrame:
    """V_n = 0 + R^k."""
    return LagrangianFrame(np.vstack([np.zeros((k, k)), np.eye(k)]))


def graph_frame(A: np.ndarray) -> LagrangianFrame:
    """Lagrangian graph ``{(x, A x)}`` of a symmetric k x k matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return LagrangianFrame(np.vstack([np.eye(A.shape[0]), A]))


def as_columns(F) -> np.ndarray:
    if isinstance(F, (LagrangianFrame, DoubledFrame)):
        return F.columns
    return np.asarray(F, dtype=float)


def subspace_gap(F1, F2) -> float:
    """Operator-norm distance between the orthogonal projections onto F1 and F2."""
    Z1 = as_columns(F1)
    Z2 = as_columns(F2)
    if Z1.shape != Z2.shape:
        raise MalformedInputError(f"frames have different shapes {Z1.shape} and {Z2.shape}")
    if not isinstance(F1, (LagrangianFrame, DoubledFrame)):
        _check_rank(Z1, RANK_TOL)
        Z1 = orthonormalize(Z1)
    if not isinstance(F2, (LagrangianFrame, DoubledFrame)):
        _check_rank(Z2, RANK_TOL)
        Z2 = orthonormalize(Z2)
    # For equal dimensions ||P1 - P2|| = ||(I - P1) P2||, which is the sine of
    # the largest principal angle and is computed here without cancellation.
    return float(np.linalg.norm(Z2 - Z1 @ (Z1.T @ Z2), 2))


def intersection_dim(F1, F2, tol: float = 1e-8) -> int:
    """Dimension of F1 n F2 from the small singular values of ``[Z1, Z2]``."""
    Z1 = orthonormalize(as_columns(F1))
    Z2 = orthonormalize(as_columns(F2))
    if Z1.shape[0] != Z2.shape[0]:
        raise MalformedInputError("frames live in different ambient spaces")
    s = np.linalg.svd(np.hstack([Z1, Z2]), compute_uv=False)
    # rank deficiency of the stacked matrix counts common directions
    return int(np.sum(s <= tol * s[0]))


def pairing_determinant(F1, F2) -> float:
    """``det(Z1^T J Z2)`` for orthonormal frames; zero exactly on intersections."""
    Z1 = as_columns(F1)
    Z2 = as_columns(F2)
    return float(np.linalg.det(Z1.T @ standard_J(Z1.shape[1]) @ Z2))


# ---------------------------------------------------------------------------
# doubled space


def doubled_form(k: int) -> np.ndarray:
    """The matrix diag(-J, J) of the form -omega + omega on R^2k + R^2k."""
    J = standard_J(k)
    Z = np.zeros_like(J)
    return np.block([[-J, Z], [Z, J]])


@dataclass(frozen=True)
class DoubledFrame:
    """Orthonormal 4k x 2k frame of a Lagrangian subspace of (R^4k, diag(-J, J))."""

    columns: np.ndarray
    k: int = field(init=False)

    def __post_init__(self):
        Z = np.array(self.columns, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != 2 * Z.shape[1] or Z.shape[1] % 2:
            raise MalformedInputError(f"a doubled frame must be 4k x 2k, got shape {Z.shape}")
        _check_rank(Z, RANK_TOL)
        Z = orthonormalize(Z)
        k = Z.shape[1] // 2
        iso = np.linalg.norm(Z.T @ doubled_form(k) @ Z, 2)
        if iso > ISOTROPY_TOL:
            raise InvalidFrameError(f"frame is not isotropic for -omega+omega (residual {iso:.3e})")
        Z.setflags(write=False)
        object.__setattr__(self, "columns", Z)
        object.__setattr__(self, "k", k)


def graph_embed(M: np.ndarray, sign: int = 1, tol: float = SYMP_TOL) -> DoubledFrame:
    """Frame of ``Gr(sign * M) = {(x, sign * M x)}`` in the doubled space."""
    if sign not in (1, -1):
        raise MalformedInputError("sign must be +1 or -1")
    M = np.asarray(M, dtype=float)
    k = _half_dim(M)
    if not is_symplectic(M, tol):
        raise MalformedInputError(f"matrix is not symplectic (residual {symplectic_residual(M):.3e})")
    return DoubledFrame(np.vstack([np.eye(2 * k), sign * M]))


def direct_sum_frame(F1: LagrangianFrame, F2: LagrangianFrame) -> DoubledFrame:
    """The product Lagrangian F1 + F2 of the doubled space."""
    Z1, Z2 = as_columns(F1), as_columns(F2)
    top = np.hstack([Z1, np.zeros_like(Z2)])
    bottom = np.hstack([np.zeros_like(Z1), Z2])
    return DoubledFrame(np.vstack([top, bottom]))


def _doubled_to_standard_matrix(k: int) -> np.ndarray:
    """Symplectic isomorphism (R^4k, diag(-J, J)) -> (R^4k, J_4k).

    Flips the sign of the first copy's momenta and interleaves the blocks to
    (x1, x2, y1, y2).
    """
    C = np.diag(np.r_[np.ones(k), -np.ones(k), np.ones(2 * k)])
    perm = np.r_[0:k, 2 * k:3 * k, k:2 * k, 3 * k:4 * k]
    return np.eye(4 * k)[perm] @ C


def to_standard(D) -> LagrangianFrame:
    """Express a doubled-space Lagrangian as a Lagrangian of the standard R^4k."""
    Z = as_columns(D)
    k = Z.shape[1] // 2
    return LagrangianFrame(_doubled_to_standard_matrix(k) @ Z)


def doubled_generator(B: np.ndarray) -> np.ndarray:
    """Standard-space Hamiltonian generator of ``(u, v) -> (u, gamma v)``.

    If ``gamma' = J B gamma`` then the graph frames ``T (x, gamma x)`` obey
    ``Z' = J_4k Btilde Z`` with ``Btilde`` returned here.
    """
    B = np.asarray(B, dtype=float)
    k = _half_dim(B)
    idx = np.r_[k:2 * k, 3 * k:4 * k]  # positions of (x2, y2) after the interleave
    out = np.zeros((4 * k, 4 * k))
    out[np.ix_(idx, idx)] = B
    return out
