import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ere.collision import orbit_generator
from ere.errors import NoCrossingError
from ere.flow import fundamental_for, monodromy_true_anomaly
from ere.maslov import (
    LagrangianPath,
    crossing_form,
    hormander_index,
    index_pm1,
    maslov_index,
    maslov_rs,
)
from ere.models import build_config, equilibrium_data
from ere.symplectic import dirichlet, neumann, standard_J
from ere import verify


def rotation_path(b):
    """``theta -> exp(J theta) V_d`` in R^2, generated by B = I."""
    return LagrangianPath.constant_generator(np.eye(2), dirichlet(1), (0.0, b))


def test_rotation_crossing_form_is_positive():
    form = crossing_form(rotation_path(1.0), dirichlet(1), 0.0)
    assert form.kernel_dim == 1
    assert form.signature == 1
    assert form.regular


def test_crossing_form_off_crossing_raises():
    with pytest.raises(NoCrossingError):
        crossing_form(rotation_path(1.0), dirichlet(1), 0.5)


@pytest.mark.parametrize("r, sign", [(-0.1, 1), (0.5, -1)])
def test_scalar_l0_crossing_sign(r, sign):
    cfg = build_config("custom", R=np.array([[r]]))
    path = LagrangianPath.from_flow(orbit_generator("l0", cfg), neumann(1), (0.0, 2.0))
    assert crossing_form(path, neumann(1), 0.0).signature == sign


def test_constant_path_has_index_zero():
    path = LagrangianPath(lambda t: neumann(1).columns, (0.0, 1.0), lambda t: np.zeros((2, 2)))
    assert maslov_index(path, dirichlet(1)).index == 0
    assert maslov_rs(path, dirichlet(1)) == 0


def test_full_rotation_counts_two():
    rep = maslov_index(rotation_path(2 * math.pi), dirichlet(1))
    assert rep.index == 2
    assert rep.combination() == 2
    assert [round(c.time, 8) for c in rep.crossings] == pytest.approx([0.0, math.pi, 2 * math.pi])


def test_rs_variant_weights_the_start_by_half():
    path = rotation_path(math.pi / 2)
    assert maslov_index(path, dirichlet(1)).index == 1
    assert maslov_rs(path, dirichlet(1)) - maslov_index(path, dirichlet(1)).index == -0.5


def test_index_agrees_with_determinant_zero_count():
    # oracle: zeros of det(Z_d^T J exp(J t B) V_d) = sin(t) for B = I on (0, b)
    b = 3 * math.pi + 0.4
    rep = maslov_index(rotation_path(b), dirichlet(1))
    assert rep.index == 1 + 3  # start crossing plus three interior ones


@pytest.mark.parametrize("r", [-0.1, 0.5])
def test_hormander_examples(r):
    cfg = build_config("custom", R=np.array([[r]]))
    Vd, Vn = dirichlet(1), neumann(1)
    m, p = equilibrium_data(cfg, -1), equilibrium_data(cfg, 1)
    assert hormander_index(Vd, Vn, Vd, m.V_u) == 1
    assert hormander_index(Vd, Vn, Vn, m.V_u) == 0
    assert hormander_index(Vn, Vd, m.V_u, p.V_u) == (1 if r < 0 else 0)


@pytest.mark.parametrize("r", [-0.1, 0.5])
def test_hormander_formula_matches_path_difference(r):
    cfg = build_config("custom", R=np.array([[r]]))
    m, p = equilibrium_data(cfg, -1), equilibrium_data(cfg, 1)
    args = (dirichlet(1), neumann(1), m.V_u, p.V_u)
    assert hormander_index(*args, method="formula") == hormander_index(*args, method="path")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_hormander_bound(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 3))
    frames = [verify._rand_lagrangian(k, rng) for _ in range(4)]
    assert abs(hormander_index(*frames)) <= 2 * k


@pytest.mark.parametrize("e", [0.0, 0.3, 0.9])
def test_kepler_pm1(e):
    _, gamma = monodromy_true_anomaly(build_config("euler", 0.0), e)
    res = index_pm1(gamma)
    assert (res.i1, res.im1) == (0, 2)
    assert abs(res.im1 - res.i1) <= 2


@pytest.mark.slow
def test_euler_near_collision_indices():
    gamma = fundamental_for(build_config("euler", 0.1), 0.999)
    res = index_pm1(gamma)
    assert (res.i1, res.im1) == (3, 3)
    path = gamma.lagrangian_path(dirichlet(2))
    rep = maslov_index(path, dirichlet(2))
    assert rep.index == 4
    # the path starts on V_d, a crossing with m+ = 2 that the half-weighted
    # variant counts once instead of twice
    start = rep.crossings[0]
    assert (start.time, start.m_plus, start.m_minus) == (path.interval[0], 2, 0)
    assert maslov_rs(path, dirichlet(2)) == 4 - 1


@pytest.mark.parametrize("e", [0.2, 0.6])
@pytest.mark.parametrize("delta", [0.05, 1.0, 3.0])
def test_pm1_gap_at_most_k(delta, e):
    res = index_pm1(fundamental_for(build_config("euler", delta), e))
    assert abs(res.im1 - res.i1) <= 2


def test_symplectic_form_sign_convention():
    J = standard_J(1)
    assert np.allclose(J, [[0, -1], [1, 0]])


@pytest.mark.parametrize(
    "prop",
    [
        verify.prop_reparametrization,
        verify.prop_homotopy,
        verify.prop_additivity,
        verify.prop_symplectic_invariance,
        verify.prop_symplectic_additivity,
        verify.prop_monotone,
        verify.prop_graph_reduction,
    ],
    ids=lambda f: f.__name__,
)
@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_index_properties(prop, seed):
    assert prop(np.random.default_rng(seed))
