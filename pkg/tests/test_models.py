import math

import numpy as np
import pytest
from scipy.optimize import brentq

from ere.errors import DomainError, MalformedInputError, NonHyperbolicError, SymmetryError
from ere.flow import blowup_trajectory
from ere.models import (
    P_MINUS,
    P_PLUS,
    RING3_MC_MINUS_ONE,
    RING3_MC_ZERO,
    BlowUpPoint,
    CentralConfig,
    blowup_rhs,
    build_config,
    equilibrium_data,
    essential_B,
    hat_B,
    hat_B_qQ,
    heteroclinic,
    orbit_initialization,
    ring3_D,
    ring3_lambda,
    sturm_coeffs,
)
from ere.symplectic import standard_J


def test_euler_config():
    cfg = build_config("euler", 0.1)
    assert np.array_equal(cfg.R, np.diag([-0.1, 3.2]))
    assert cfg.lambda1 == pytest.approx(-0.1)
    assert cfg.morse_index == 1
    assert cfg.hyperbolic_equilibria
    assert np.array_equal(cfg.N, np.diag([1.0, -1.0]))


def test_lagrange_config():
    cfg = build_config("lagrange", 9)
    assert np.array_equal(cfg.R, np.diag([1.5, 1.5]))
    assert cfg.morse_index == 0


def test_ring3_boundary_has_unit_eigenvalue():
    ev = np.linalg.eigvalsh(build_config("ring3", math.sqrt(3) / 24).R)
    assert ev[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m_c", [0.0, 0.1, 0.3, 2.0])
def test_ring3_eigenvalue_formula_matches_matrix(m_c):
    lp, lm = ring3_lambda(m_c)
    ev = np.linalg.eigvalsh(ring3_D(m_c))
    assert ev[0] == pytest.approx(min(lm, 0.5), abs=1e-12)
    assert ev[-1] == pytest.approx(max(lp, 0.5), abs=1e-12)


def test_ring3_thresholds_by_bisection():
    lam_minus = lambda m: np.linalg.eigvalsh(ring3_D(m))[0]
    assert brentq(lam_minus, 1e-6, 0.5, xtol=1e-14) == pytest.approx(RING3_MC_ZERO, abs=1e-10)
    assert brentq(lambda m: lam_minus(m) + 1, 0.1, 5, xtol=1e-14) == pytest.approx(RING3_MC_MINUS_ONE, abs=1e-10)
    assert RING3_MC_ZERO == pytest.approx(math.sqrt(3) / 24)


@pytest.mark.parametrize(
    "family, param, exc",
    [("lagrange", 9.5, DomainError), ("lagrange", 0.0, DomainError), ("euler", -0.1, DomainError),
     ("ring3", -1.0, DomainError), ("planet", 1.0, DomainError), ("euler", None, DomainError)],
)
def test_family_domains(family, param, exc):
    with pytest.raises(exc):
        build_config(family, param)


def test_custom_validation():
    with pytest.raises(MalformedInputError):
        build_config("custom", R=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(SymmetryError):
        build_config("custom", R=np.diag([1.0, 2.0]), N=np.eye(2))
    with pytest.raises(SymmetryError):
        build_config("custom", R=np.array([[1.0, 0.5], [0.5, 1.0]]), N=np.diag([1.0, -1.0]))
    cfg = build_config("custom", R=np.diag([1.0, 2.0]), N=np.diag([1.0, -1.0]))
    assert isinstance(cfg, CentralConfig) and cfg.N is not None


def test_essential_B_examples():
    cfg = build_config("euler", 0.1)
    circ = [essential_B(t, cfg, 0.0) for t in np.linspace(0, 2 * np.pi, 7)]
    assert all(np.array_equal(circ[0], M) for M in circ)
    B = essential_B(0.0, cfg, 0.5)
    assert np.allclose(B[2:, 2:], np.eye(2) - np.diag([-0.1, 3.2]) / 1.5, atol=1e-15)
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, 2 * np.pi, 20):
        M = essential_B(t, cfg, rng.uniform(0, 0.99))
        assert np.max(np.abs(M - M.T)) < 1e-14
    with pytest.raises(DomainError):
        essential_B(0.0, cfg, 1.0)


def test_sturm_correspondence():
    cfg = build_config("ring3", 0.2)
    sc = sturm_coeffs(cfg, 0.6)
    for t in np.linspace(0, 2 * np.pi, 9):
        assert np.max(np.abs(sc.hamiltonian(t) - essential_B(t, cfg, 0.6))) < 1e-13


@pytest.mark.parametrize("r1, r2", [(-0.1, 3.2), (0.7, 2.3), (1.5, 1.5)])
def test_circular_exponents_match_second_order_analysis(r1, r2):
    # y = v exp(lambda t) solves the second-order system when
    # (lambda^2 - r1)(lambda^2 - r2) + 4 lambda^2 = 0
    cfg = build_config("custom", R=np.diag([r1, r2]))
    A = standard_J(2) @ essential_B(0.0, cfg, 0.0)
    quartic = np.polyadd(np.polymul([1, 0, -r1], [1, 0, -r2]), [4, 0, 0])
    lam = np.sort_complex(np.linalg.eigvals(A))
    roots = np.sort_complex(np.roots(quartic))
    assert np.allclose(lam, roots, atol=1e-8)


def test_blowup_rhs_examples():
    assert blowup_rhs(P_PLUS) == pytest.approx((0.0, 0.0), abs=1e-15)
    assert blowup_rhs(P_MINUS) == pytest.approx((0.0, 0.0), abs=1e-15)
    assert blowup_rhs(BlowUpPoint(1.0, 0.0)) == (0.0, 0.0)
    assert BlowUpPoint(1.0, 0.0).energy == -0.5
    assert blowup_rhs(BlowUpPoint(0.0, 0.0)) == (0.0, -1.0)


def test_energy_is_a_first_integral():
    rng = np.random.default_rng(4)
    h = 1e-6
    for q, Q in rng.uniform([0, -2], [2, 2], size=(20, 2)):
        dq, dQ = blowup_rhs(BlowUpPoint(q, Q))
        E = lambda a, b: BlowUpPoint(a, b).energy
        grad = ((E(q + h, Q) - E(q - h, Q)) / (2 * h), (E(q, Q + h) - E(q, Q - h)) / (2 * h))
        assert abs(grad[0] * dq + grad[1] * dQ) < 1e-8


def test_heteroclinic_examples():
    p = heteroclinic("lplus", 0.0)
    assert (p.q, p.Q) == pytest.approx((math.sqrt(2), 0.0))
    far = heteroclinic("lplus", 80.0)
    assert (far.q, far.Q) == pytest.approx((0.0, math.sqrt(2)), abs=1e-12)
    assert heteroclinic("l0", 0.0) == BlowUpPoint(0.0, 0.0)
    for tau in np.linspace(-6, 6, 13):
        assert abs(heteroclinic("lplus", tau).energy) < 1e-14
        assert heteroclinic("l0", tau).energy == 0.0
    with pytest.raises(DomainError):
        heteroclinic("l1", 0.0)


def test_heteroclinic_solves_the_blowup_field():
    h = 1e-6
    for side in ("l0", "lplus"):
        for tau in (-2.0, -0.3, 0.4, 1.7):
            a, b = heteroclinic(side, tau - h), heteroclinic(side, tau + h)
            num = ((b.q - a.q) / (2 * h), (b.Q - a.Q) / (2 * h))
            assert num == pytest.approx(blowup_rhs(heteroclinic(side, tau)), abs=1e-8)


def test_hat_B_examples():
    cfg = build_config("euler", 0.1)
    R, I = cfg.R, np.eye(2)
    c = math.sqrt(2) / 4
    assert np.allclose(hat_B(P_MINUS, cfg), np.block([[I, -c * I], [-c * I, -R]]), atol=1e-15)
    assert np.array_equal(hat_B_qQ(0.0, 0.0, cfg), np.block([[I, 0 * I], [0 * I, -R]]))
    rng = np.random.default_rng(1)
    for q, Q in rng.uniform([0, -2], [2, 2], size=(10, 2)):
        M = hat_B_qQ(q, Q, cfg)
        assert np.max(np.abs(M - M.T)) < 1e-14


def test_scalar_l0_second_order_form():
    # first coordinate of z' = J Bhat z along l0 obeys x'' = (1/4 - tanh^2/8 + r) x
    r = 0.37
    cfg = build_config("custom", R=np.array([[r]]))
    J = standard_J(1)
    s2 = math.sqrt(2)
    rng = np.random.default_rng(2)
    for tau in rng.uniform(-5, 5, 10):
        th = math.tanh(s2 * tau / 2)
        Q = -s2 * th
        dQ = -(1 - th * th)
        B = hat_B_qQ(0.0, Q, cfg)
        dB = np.array([[0.0, dQ / 4], [dQ / 4, 0.0]])
        z = rng.normal(size=2)
        x2 = (J @ dB @ z + J @ B @ J @ B @ z)[0]
        assert abs(x2 - (0.25 - th * th / 8 + r) * z[0]) < 1e-10


def test_brake_symmetry_along_lplus():
    for cfg in (build_config("euler", 0.1), build_config("lagrange", 6), build_config("ring3", 0.3)):
        Z = np.zeros_like(cfg.N)
        Nh = np.block([[cfg.N, Z], [Z, -cfg.N]])
        for tau in np.linspace(-4, 4, 17):
            a, b = heteroclinic("lplus", -tau), heteroclinic("lplus", tau)
            assert np.linalg.norm(Nh @ hat_B(a, cfg) - hat_B(b, cfg) @ Nh) < 1e-12


def test_equilibrium_scalar_example():
    cfg = build_config("custom", R=np.array([[0.5]]))
    eq = equilibrium_data(cfg, -1)
    eta = math.sqrt(0.625)
    assert eq.eta == pytest.approx([eta])
    assert np.sort(np.linalg.eigvals(eq.D).real) == pytest.approx([-eta, eta])
    v = eq.V_u.columns[:, 0]
    expected = np.array([math.sqrt(2) / 4 + eta, 1.0])
    assert abs(v[0] * expected[1] - v[1] * expected[0]) < 1e-12


@pytest.mark.parametrize("name, param", [("euler", 0.1), ("lagrange", 6), ("ring3", 0.3), ("lagrange", 9)])
@pytest.mark.parametrize("sign", [1, -1])
def test_equilibrium_frames(name, param, sign):
    cfg = build_config(name, param)
    eq = equilibrium_data(cfg, sign)
    J = standard_J(cfg.k)
    for V in (eq.V_u.columns, eq.V_s.columns):
        DV = eq.D @ V
        assert np.linalg.norm(DV - V @ np.linalg.lstsq(V, DV, rcond=None)[0]) < 1e-9
        assert np.linalg.norm(V.T @ J @ V) < 1e-10
    assert np.allclose(np.sort(eq.eta), np.sqrt(0.125 + cfg.eigenvalues))


def test_zero_eigenvalue_rate():
    cfg = build_config("custom", R=np.diag([0.0, 1.0]))
    assert cfg.eta[0] == pytest.approx(0.353553, abs=1e-6)


def test_non_hyperbolic_equilibria():
    with pytest.raises(NonHyperbolicError):
        equilibrium_data(build_config("euler", 1.0), -1)


@pytest.mark.parametrize("e, q, E", [(0.0, 1.0, -0.5), (0.8, math.sqrt(1.8), -0.18)])
def test_orbit_initialization(e, q, E):
    p, e_hat = orbit_initialization(e)
    assert (p.q, p.Q) == pytest.approx((q, 0.0), abs=1e-15)
    assert p.energy == pytest.approx(E, abs=1e-15)
    assert p.energy == pytest.approx(-e_hat, abs=1e-15)
    with pytest.raises(DomainError):
        orbit_initialization(1.0)


@pytest.mark.parametrize("e", [0.0, 0.5, 0.9, 0.99])
def test_energy_conserved_along_orbit(e):
    traj = blowup_trajectory(e)
    assert traj.energy_error < 1e-9
