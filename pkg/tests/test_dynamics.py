import numpy as np
import pytest

from eqfuller.dynamics import (build_poincare_system, check_equivariance, first_return, flow,
                               pointwise_return_map, return_map_jacobian)
from eqfuller.errors import EquilibriumPoint, PreconditionViolation, StepFailure
from eqfuller.group_theory import reflection_action, trivial_action, trivial_group
from eqfuller.systems import (VectorFieldSystem, axis_z2, builtin_system, hopf, hopf_z2, linear,
                              perturb, rotation_center, zero_field)

TWO_PI = 2 * np.pi


def python_hopf():
    """The unit Hopf field as plain Python callables (no jit)."""
    def rhs(x, p):
        g = 1.0 - x[0] ** 2 - x[1] ** 2
        return np.array([x[0] * g - x[1], x[1] * g + x[0]])
    return VectorFieldSystem(trivial_action(trivial_group(), 2), rhs, name="py_hopf")


# -- equivariance ------------------------------------------------------------------

def test_check_equivariance_examples():
    assert check_equivariance(hopf_z2()) < 1e-12
    wrong = VectorFieldSystem(reflection_action(2), hopf().rhs, hopf().jac, 0, "bad",
                              hopf().param_map)
    assert check_equivariance(wrong) > 0.5
    assert check_equivariance(zero_field(2, "antipodal")) == 0.0


def test_check_equivariance_on_builtins():
    for name in ("hopf_z2", "axis_z2", "ring_zn", "two_cycles", "vdp"):
        assert check_equivariance(builtin_system(name)) < 1e-12, name
    with pytest.raises(ValueError):
        check_equivariance(hopf_z2(), n_samples=0)


# -- flow ----------------------------------------------------------------------------

def test_flow_examples():
    x0 = np.array([0.3, -0.7])
    assert np.array_equal(flow(zero_field(2), x0, 1.0).x_final, x0)
    growth = linear([[1.0]])
    assert abs(flow(growth, [1.0], 1.0).x_final[0] - np.e) < 1e-8
    r = np.linalg.norm(flow(hopf(), [2.0, 0.0], 30.0).x_final)
    assert abs(r - 1.0) < 1e-6


def test_flow_dense_samples_and_backward():
    s = hopf()
    tr = flow(s, [1.0, 0.0], TWO_PI, t_eval=[np.pi / 2, np.pi])
    assert np.allclose(tr.samples, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-8)
    back = flow(s, [1.0, 0.0], np.pi / 2, backward=True).x_final
    assert np.allclose(back, [0.0, -1.0], atol=1e-8)


def test_flow_rejects_bad_arguments():
    with pytest.raises(ValueError):
        flow(hopf(), [1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        flow(hopf(), [1.0, 0.0], 1.0, rtol=-1.0)


def test_flow_blowup_raises():
    blowup = VectorFieldSystem(trivial_action(trivial_group(), 1), lambda x, p: x * x,
                               name="blowup", escape_radius=1e300)
    with pytest.raises(StepFailure):
        flow(blowup, [1.0], 2.0)


def test_python_callables_match_compiled():
    a = flow(python_hopf(), [1.5, 0.2], 3.0, with_stm=True)
    b = flow(hopf(), [1.5, 0.2], 3.0, with_stm=True)
    assert np.allclose(a.x_final, b.x_final, atol=1e-9)
    assert np.allclose(a.stm, b.stm, atol=1e-6)


# -- Poincare systems ---------------------------------------------------------------------

def test_poincare_system_examples():
    ps = build_poincare_system(hopf(), [1.0, 0.0])
    assert ps.n_copies == 1
    assert np.allclose(ps.flow_dir, [0.0, 1.0])
    assert np.allclose(np.abs(ps.disc_basis[:, 0]), [1.0, 0.0])
    ps2 = build_poincare_system(hopf_z2(), [1.0, 0.0])
    assert ps2.n_copies == 2
    assert np.allclose(sorted(ps2.centers[:, 0]), [-1.0, 1.0])
    with pytest.raises(EquilibriumPoint):
        build_poincare_system(hopf(), [0.0, 0.0])


def test_disc_invariants():
    ps = build_poincare_system(hopf_z2(), [1.0, 0.0])
    d = np.linalg.norm(ps.centers[0] - ps.centers[1])
    assert d >= ps.radius_D / 2
    assert 0 < ps.radius_Dp < ps.radius_D
    for j in range(ps.n_copies):
        assert abs(ps.basis(j)[:, 0] @ ps.normals[j]) < 1e-12


def test_first_return_examples():
    ps = build_poincare_system(hopf(), [1.0, 0.0])
    rec = first_return(ps, hopf(), [1.0, 0.0])
    assert abs(rec.time - TWO_PI) < 1e-6
    assert np.allclose(rec.landing, [1.0, 0.0], atol=1e-8)
    ps2 = build_poincare_system(hopf_z2(), [1.0, 0.0])
    rec = first_return(ps2, hopf_z2(), [1.0, 0.0])
    assert abs(rec.time - np.pi) < 1e-6
    assert np.allclose(rec.landing, [-1.0, 0.0], atol=1e-8)
    assert rec.copy_index == 1
    with pytest.raises(PreconditionViolation):
        first_return(ps, hopf(), [1.0 + 0.9 * ps.radius_D, 0.0])


def test_pointwise_return_examples():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    ret = pointwise_return_map(ps, s, [1.0, 0.0])
    assert ret.hops == 2
    assert abs(ret.t_total - TWO_PI) < 1e-6
    assert np.allclose(ret.image, 0.0, atol=1e-8)
    ps1 = build_poincare_system(hopf(), [1.0, 0.0], radius_D=0.5)
    assert pointwise_return_map(ps1, hopf(), [1.1, 0.0]).hops == 1
    out = pointwise_return_map(ps1, hopf(), [1.2, 0.0])
    assert abs(out.image[0]) < 0.2
    r_new = np.linalg.norm(out.landing)
    assert abs(r_new - 1.0) < 0.2


def test_time_additivity():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    y = ps.from_disc([0.05])
    ret = pointwise_return_map(ps, s, y)
    assert abs(sum(r.time for r in ret.records) - ret.t_total) < 1e-9
    again = flow(s, y, ret.t_total).x_final
    assert np.allclose(again, ret.landing, atol=1e-8)


def test_returns_are_equivariant():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    M = s.action.matrices[1]
    for u in (-0.04, 0.0, 0.03):
        y = ps.from_disc([u])
        a = first_return(ps, s, y)
        b = first_return(ps, s, M @ y)
        assert np.allclose(b.landing, M @ a.landing, atol=1e-8)
        assert abs(a.time - b.time) < 1e-8


def test_perturbation_stability():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    delta = 1e-3
    sp = perturb(s, delta, seed=3)
    assert check_equivariance(sp) < 1e-12
    for u in (-0.04, 0.0, 0.04):
        y = ps.from_disc([u])
        a = first_return(ps, s, y)
        b = first_return(ps, sp, y)
        assert np.linalg.norm(a.landing - b.landing) <= 100 * delta


# -- Jacobians ------------------------------------------------------------------------------

def test_jacobian_examples():
    ps = build_poincare_system(hopf(), [1.0, 0.0])
    DP = return_map_jacobian(ps, hopf(), [1.0, 0.0])
    assert DP.shape == (1, 1)
    assert abs(DP[0, 0] - np.exp(-4 * np.pi)) < 1e-6
    rot = rotation_center()
    psr = build_poincare_system(rot, [1.0, 0.0])
    assert np.allclose(return_map_jacobian(psr, rot, [1.0, 0.0]), np.eye(1), atol=1e-8)


def test_fd_and_variational_agree_off_orbit():
    s = hopf()
    ps = build_poincare_system(s, [1.0, 0.0], radius_D=0.5)
    y = ps.from_disc([0.1])
    var = return_map_jacobian(ps, s, y)
    fd = return_map_jacobian(ps, s, y, scheme="fd")
    assert np.max(np.abs(var - fd)) < 1e-6
    with pytest.raises(ValueError):
        return_map_jacobian(ps, s, y, scheme="spline")


def test_jacobian_commutes_with_isotropy():
    s = axis_z2()
    x0 = np.array([1.0, 0.0, 0.0])
    ps = build_poincare_system(s, x0)
    DP = return_map_jacobian(ps, s, x0)
    flip = 1
    j, A = ps.disc_matrix(flip, 0)
    assert j == 0
    assert np.allclose(A @ DP @ np.linalg.inv(A), DP, atol=1e-6)


def test_jacobian_transported_between_copies():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    DP0 = return_map_jacobian(ps, s, [1.0, 0.0])
    DP1 = return_map_jacobian(ps, s, [-1.0, 0.0])
    j, A = ps.disc_matrix(1, 0)
    assert j == 1
    assert np.allclose(DP1, A @ DP0 @ np.linalg.inv(A), atol=1e-6)
