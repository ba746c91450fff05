import math

import numpy as np
import pytest

from ere.flow import fundamental_for, graph_kernel_dim
from ere.maslov import index_pm1
from ere.models import build_config, essential_B
from ere.stability import (
    brake_half_indices,
    collision_targets,
    compute_cell,
    growth_lower_bound,
    hyperbolicity_check,
    label_check,
    morse_indices,
    near_collision_report,
    ordering_holds,
    small_large,
    sweep,
    trace_degenerate_curves,
)
from ere.symplectic import standard_J

# circular-orbit degenerate points: det(J B - i w I) = 0 with w = 3/2 (multiplier -1)
# and w = 2 (multiplier +1), solved in closed form for R = diag(-delta, 2 delta + 3)
PSI1_CIRCULAR = (-0.75 + math.sqrt(23.0625)) / 4
PHI1_CIRCULAR = (1 + math.sqrt(97)) / 4


@pytest.mark.parametrize("delta, omega", [(PSI1_CIRCULAR, 1.5), (PHI1_CIRCULAR, 2.0)])
def test_circular_closed_forms_are_resonances(delta, omega):
    A = standard_J(2) @ essential_B(0.0, build_config("euler", delta), 0.0)
    assert abs(np.linalg.det(A - 1j * omega * np.eye(4))) < 1e-10


def test_near_collision_morse_indices():
    m = morse_indices(build_config("euler", 0.1), 0.999)
    assert (m.phi_d, m.phi_n) == (2, 4)
    assert m.mu_d - 2 == m.phi_d


def test_strong_minimizer_morse_indices():
    m = morse_indices(build_config("lagrange", 8.5), 0.5)
    assert (m.phi_d, m.phi_n) == (0, 0)


@pytest.mark.parametrize(
    "family, param, e",
    [("euler", 0.1, 0.3), ("euler", 1.0, 0.8), ("lagrange", 6, 0.5), ("ring3", 0.3, 0.4), ("euler", 3.0, 0.1)],
)
def test_dirichlet_index_below_neumann(family, param, e):
    m = morse_indices(build_config(family, param), e)
    assert m.phi_d <= m.phi_n


@pytest.mark.parametrize("e", [0.0, 0.3, 0.7, 0.95])
def test_strong_minimizer_certified(e):
    res = hyperbolicity_check(build_config("lagrange", 8.5), e)
    assert res.certified
    assert res.classification == "hyperbolic"


def test_near_collision_euler_is_hyperbolic():
    assert hyperbolicity_check(build_config("euler", 0.1), 0.999).classification == "hyperbolic"


def test_nondegenerate_minimizer_near_collision_is_hyperbolic():
    assert hyperbolicity_check(build_config("lagrange", 6), 0.999).classification == "hyperbolic"


def test_kepler_not_certified():
    res = hyperbolicity_check(build_config("euler", 0.0), 0.4)
    assert not res.certified


@pytest.mark.parametrize("family, param, e", [("euler", 0.1, 0.0), ("euler", 0.1, 0.9), ("euler", 1.0, 0.6),
                                              ("lagrange", 6, 0.5), ("ring3", 0.3, 0.3)])
def test_brake_half_period_sums(family, param, e):
    cfg = build_config(family, param)
    half = brake_half_indices(cfg, e)
    full = index_pm1(fundamental_for(cfg, e))
    assert half[("+", "+")] + half[("-", "-")] == full.i1 + cfg.k
    assert half[("+", "-")] + half[("-", "+")] == full.im1


def test_circular_curves_and_coincidence():
    curves = trace_degenerate_curves([0.0], j_max=1, delta_max=3.0, n_scan=40)
    by = {c.symbol: c.at(0.0) for c in curves}
    assert by["psi+_1"] == pytest.approx(PSI1_CIRCULAR, abs=1e-7)
    assert by["psi-_1"] == pytest.approx(PSI1_CIRCULAR, abs=1e-7)
    assert by["phi_1"] == pytest.approx(PHI1_CIRCULAR, abs=1e-7)
    assert ordering_holds(curves, 0.0)
    for c in curves:
        assert all(p.width <= 1e-8 for p in c.points)
    # a phi root carries a two-dimensional kernel of gamma(2 pi) - I
    gamma = fundamental_for(build_config("euler", by["phi_1"]), 0.0)
    assert graph_kernel_dim(gamma.monodromy, 1) == 2


@pytest.mark.slow
def test_index_jumps_across_traced_curves():
    e = 0.5
    curves = trace_degenerate_curves([e], j_max=2, delta_max=5.0, n_scan=60)
    assert ordering_holds(curves, e)
    jumps = label_check(curves, e)
    i1 = [v for _, v in jumps["i1"]]
    assert np.all(np.diff(i1) == 2)
    # i_-1 is even below psi_j^s and odd between psi_j^s and psi_j^l
    sl = small_large(curves, e)
    for d, v in jumps["im1"]:
        inside = any(s < d <= l for s, l in sl.values())
        assert v % 2 == (1 if inside else 0)


def test_row_is_a_step_function():
    deltas = np.linspace(0.05, 6.0, 13)
    res = sweep("euler", deltas, [0.5], jobs=1)
    assert res.ok_fraction == 1.0
    assert res.audit["monotone"]
    i1 = np.array([c.i1 for c in res.cells])
    assert set(np.diff(i1)) <= {0, 2}
    assert i1[-1] > i1[0]


def test_cell_failure_is_isolated():
    res = sweep("lagrange", [6.0, 10.0], [0.5], jobs=1)
    assert [c.status for c in res.cells] == ["ok", "domain_error"]
    assert res.ok_fraction == 0.5


def test_cell_invariants():
    c = compute_cell("euler", 0.3, 0.6)
    assert c.mu_d - 2 <= c.mu_n
    assert c.status == "ok" and c.drift <= 1e-9


def test_growth_bound_holds():
    cfg = build_config("euler", 1.0)
    mu = []
    for m in (2, 3, 4):
        e = 1 - 10.0 ** (-m)
        bound, applicable = growth_lower_bound(cfg, e)
        mu.append(morse_indices(cfg, e).mu_d)
        assert mu[-1] >= bound
        assert applicable == (0.5 * (1 - e * e) < 0.0625 ** 3)
    assert mu[0] < mu[1] < mu[2]


def test_collision_targets():
    assert collision_targets(build_config("euler", 0.1)) == (4, 4, 3, 3)
    assert collision_targets(build_config("lagrange", 6)) == (2, 0, 0, 0)


def test_near_collision_tail_is_monotone():
    rep = near_collision_report(build_config("lagrange", 6), [0.99, 0.995, 0.999])
    assert rep.tail_monotone
    assert rep.first_match is not None
    assert all(r.matched for r in rep.rows if r.e >= rep.first_match)
