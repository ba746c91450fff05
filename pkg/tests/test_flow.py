import math

import numpy as np
import pytest
from scipy.linalg import expm

from ere.errors import DomainError
from ere.flow import (
    blowup_flow,
    classify,
    fundamental_for,
    integrate_fundamental,
    monodromy_true_anomaly,
    true_anomaly_generator,
)
from ere.maslov import index_pm1
from ere.models import build_config, essential_B
from ere.symplectic import standard_J, symplectic_residual, symplectic_sum


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_constant_coefficients_match_matrix_exponential():
    cfg = build_config("euler", 0.1)
    B = essential_B(0.0, cfg, 0.0)
    gamma = integrate_fundamental(lambda t: B, (0.0, 2 * math.pi))
    oracle = expm(2 * math.pi * standard_J(2) @ B)
    assert np.linalg.norm(gamma.monodromy - oracle) < 1e-8


def test_rotation_returns_after_one_period():
    gamma = integrate_fundamental(lambda t: np.eye(2), (0.0, 2 * math.pi))
    M = gamma.monodromy
    assert abs(math.atan2(M[1, 0], M[0, 0])) < 1e-10
    assert abs(np.linalg.det(M) - 1.0) < 1e-10
    # interior values come from the dense interpolant
    assert np.linalg.norm(gamma.matrix(1.0) - rot(1.0)) < 1e-9


def test_starts_at_identity_and_stays_symplectic():
    rep, gamma = monodromy_true_anomaly(build_config("euler", 0.1), 0.5)
    a = gamma.interval[0]
    assert np.array_equal(gamma.matrix(a), np.eye(4))
    assert symplectic_residual(gamma.monodromy) < 1e-9
    assert gamma.drift <= 1e-9


def test_semigroup_spot_checks():
    _, gamma = monodromy_true_anomaly(build_config("lagrange", 6), 0.4)
    a, b = gamma.interval
    rng = np.random.default_rng(5)
    for nu, t in np.sort(rng.uniform(a, b, size=(8, 2)), axis=1):
        lhs = gamma.propagator(t, nu) @ gamma.propagator(nu, a)
        assert np.linalg.norm(lhs - gamma.propagator(t, a)) < 10 * 1e-8


def test_matrix_outside_interval_rejected():
    _, gamma = monodromy_true_anomaly(build_config("euler", 0.1), 0.2)
    with pytest.raises(DomainError):
        gamma.matrix(gamma.interval[1] + 1.0)


def test_kepler_is_spectrally_stable_degenerate():
    rep, _ = monodromy_true_anomaly(build_config("euler", 0.0), 0.3)
    assert np.allclose(rep.eigenvalues, 1.0, atol=1e-4)
    assert rep.classification == "spectrally_stable_degenerate"


def test_euler_between_minus_one_curves_is_hyperbolic():
    rep, _ = monodromy_true_anomaly(build_config("euler", 0.1), 0.99)
    assert rep.classification == "hyperbolic"


@pytest.mark.parametrize("e", [0.0, 0.5, 0.9])
def test_strong_lagrange_minimizer_is_hyperbolic(e):
    rep, _ = monodromy_true_anomaly(build_config("lagrange", 8.5), e)
    assert rep.classification == "hyperbolic"


def test_eigenvalues_come_in_reciprocal_pairs():
    for cfg, e in [(build_config("euler", 0.3), 0.6), (build_config("ring3", 0.1), 0.2)]:
        rep, _ = monodromy_true_anomaly(cfg, e)
        for lam in rep.eigenvalues:
            assert np.min(np.abs(rep.eigenvalues - 1 / lam)) <= 1e-7 * max(1.0, abs(1 / lam))


def test_classify_constructions():
    hyp = symplectic_sum(np.diag([2.0, 0.5]), np.diag([3.0, 1 / 3]))
    assert classify(hyp).classification == "hyperbolic"
    ell = symplectic_sum(rot(0.7), rot(2.1))
    rep = classify(ell)
    assert rep.classification == "elliptic"
    # tr1, tr2 are lambda + 1/lambda of the two pairs
    assert sorted([rep.tr1, rep.tr2]) == pytest.approx(sorted([2 * math.cos(0.7), 2 * math.cos(2.1)]))
    assert classify(symplectic_sum(rot(0.7), np.diag([2.0, 0.5]))).classification == "elliptic_hyperbolic"


def test_classify_jordan_block_at_one():
    M = symplectic_sum(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))
    rep = classify(M)
    assert rep.classification == "spectrally_stable_degenerate"
    assert set(rep.candidates) == {"elliptic", "elliptic_hyperbolic"}
    assert rep.degenerate


def test_blowup_matches_true_anomaly_spectrum():
    cfg = build_config("euler", 0.1)
    rep_t, _ = monodromy_true_anomaly(cfg, 0.9)
    rep_b, _, _ = blowup_flow(cfg, 0.9)
    for lam in rep_t.eigenvalues:
        assert np.min(np.abs(rep_b.eigenvalues - lam)) < 1e-6 * max(1.0, abs(lam))


def test_blowup_circular_case():
    rep, gamma, traj = blowup_flow(build_config("euler", 0.1), 0.0)
    assert traj.period == pytest.approx(2 * math.pi, abs=1e-10)
    for tau in np.linspace(0, traj.period, 7):
        assert traj.point(tau)[0] == pytest.approx(1.0, abs=1e-10)
    assert traj.energy_error < 1e-9


@pytest.mark.parametrize("delta", [0.05, 0.1, 1.0])
@pytest.mark.parametrize("e", [0.3, 0.9])
def test_index_agrees_across_domains(delta, e):
    cfg = build_config("euler", delta)
    a = index_pm1(fundamental_for(cfg, e, domain="true_anomaly"))
    b = index_pm1(fundamental_for(cfg, e, domain="blowup_tau"))
    assert (a.i1, a.im1) == (b.i1, b.im1)


@pytest.mark.parametrize("cfg, e", [(build_config("euler", 0.1), 0.5), (build_config("lagrange", 8.5), 0.7)])
def test_indices_stable_over_a_decade_of_tolerance(cfg, e):
    a = index_pm1(fundamental_for(cfg, e, rtol=1e-9, atol=1e-9))
    b = index_pm1(fundamental_for(cfg, e, rtol=1e-10, atol=1e-10))
    assert (a.i1, a.im1) == (b.i1, b.im1)


def test_domain_selection_near_one():
    cfg = build_config("euler", 0.1)
    assert fundamental_for(cfg, 0.9995).domain == "blowup_tau"
    assert fundamental_for(cfg, 0.5).domain == "true_anomaly"
    with pytest.raises(DomainError):
        true_anomaly_generator(cfg, 1.0)
