import math

import numpy as np
import pytest

from lagrange_swarm.dynamics import (BoundConstants, ConstantInertiaModel, ReferenceLeader,
                                     SinusoidalDisturbance, SingularInertia, TwoLinkArm,
                                     TwoLinkArmParams, check_skew, combine_bounds, estimate_bounds,
                                     eval_dynamics, forward_accel, leader_bounds)

from conftest import table_params


# -- energy-based oracle -----------------------------------------------------------

def kinetic(p, q, qd):
    s1, c1 = math.sin(q[0]), math.cos(q[0])
    s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
    v1 = p.lc1 * qd[0] * np.array([-s1, c1])
    v2 = p.l1 * qd[0] * np.array([-s1, c1]) + p.lc2 * (qd[0] + qd[1]) * np.array([-s12, c12])
    return (0.5 * p.m1 * v1 @ v1 + 0.5 * p.I1 * qd[0] ** 2
            + 0.5 * p.m2 * v2 @ v2 + 0.5 * p.I2 * (qd[0] + qd[1]) ** 2)


def potential(p, q):
    g = p.gravity_accel
    return p.m1 * g * p.lc1 * math.sin(q[0]) + p.m2 * g * (p.l1 * math.sin(q[0]) + p.lc2 * math.sin(q[0] + q[1]))


def fd_grad(f, x, h=1e-6):
    out = np.zeros(len(x))
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        out[k] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def oracle_inertia(p, q, h=1e-4):
    # T is quadratic in qdot, so the Hessian by central differences is exact up to rounding
    M = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            ea, eb = np.eye(2)[a] * h, np.eye(2)[b] * h
            z = np.zeros(2)
            M[a, b] = (kinetic(p, q, z + ea + eb) - kinetic(p, q, z + ea - eb)
                       - kinetic(p, q, z - ea + eb) + kinetic(p, q, z - ea - eb)) / (4 * h * h)
    return M


def oracle_accel(p, q, qd, tau, zeta):
    M = oracle_inertia(p, q)
    Mdot = sum(fd_grad(lambda x: oracle_inertia(p, x)[a, b], q) @ qd * np.outer(np.eye(2)[a], np.eye(2)[b])
               for a in range(2) for b in range(2))
    dTdq = fd_grad(lambda x: kinetic(p, x, qd), q)
    dUdq = fd_grad(lambda x: potential(p, x), q)
    return np.linalg.solve(M, tau - zeta - Mdot @ qd + dTdq - dUdq)


# -- model evaluation ----------------------------------------------------------------

def test_coriolis_vanishes_at_rest(arm1):
    _, C, _, _ = eval_dynamics(arm1, [0.3, -1.1], [0.0, 0.0], 0.0)
    np.testing.assert_array_equal(C, np.zeros((2, 2)))


def test_inertia_table_entry(arm1):
    M = arm1.inertia(np.array([0.0, math.pi / 2]))
    assert M[0, 1] == pytest.approx(0.4 * 0.15 ** 2 + 0.05, abs=1e-15)
    assert M[0, 1] == pytest.approx(0.059)


def test_inertia_matches_lagrangian_oracle():
    rng = np.random.default_rng(0)
    for i in range(1, 6):
        p = table_params(i)
        arm = TwoLinkArm(p)
        for _ in range(20):
            q = rng.uniform(-math.pi, math.pi, 2)
            np.testing.assert_allclose(arm.inertia(q), oracle_inertia(p, q), atol=1e-7)


def test_gravity_is_potential_gradient():
    rng = np.random.default_rng(1)
    p = table_params(4)
    arm = TwoLinkArm(p)
    for _ in range(20):
        q = rng.uniform(-math.pi, math.pi, 2)
        np.testing.assert_allclose(arm.gravity(q), fd_grad(lambda x: potential(p, x), q), atol=1e-7)


def test_disturbance_values():
    d = SinusoidalDisturbance(index=3)
    np.testing.assert_allclose(d(10.0), [math.sin(3.0), math.cos(3.0)])
    assert d(np.array([0.0, 1.0])).shape == (2, 2)


def test_forward_accel_feedforward_cancels(arm1):
    arm = TwoLinkArm(arm1.params, SinusoidalDisturbance(index=2))
    q, qd, t = np.array([0.4, -0.7]), np.array([1.2, -0.3]), 3.0
    M, C, g, z = eval_dynamics(arm, q, qd, t)
    np.testing.assert_allclose(forward_accel(arm, q, qd, C @ qd + g + z, t), 0.0, atol=1e-12)


def test_forward_accel_scalar():
    assert forward_accel(ConstantInertiaModel([[2.0]]), [0.0], [0.0], [4.0], 0.0)[0] == pytest.approx(2.0)


def test_forward_accel_matches_energy_oracle():
    rng = np.random.default_rng(2)
    for i in range(1, 6):
        p = table_params(i)
        arm = TwoLinkArm(p, SinusoidalDisturbance(index=i))
        for _ in range(10):
            q, qd = rng.uniform(-math.pi, math.pi, 2), rng.uniform(-5, 5, 2)
            tau, t = rng.uniform(-10, 10, 2), rng.uniform(0, 40)
            np.testing.assert_allclose(forward_accel(arm, q, qd, tau, t),
                                       oracle_accel(p, q, qd, tau, arm.zeta(t)), atol=1e-6, rtol=1e-6)


def test_singular_inertia_raises():
    with pytest.raises(SingularInertia):
        forward_accel(ConstantInertiaModel(np.zeros((2, 2))), [0, 0], [0, 0], [1, 1], 0.0)


def test_inertia_positive_definite_everywhere():
    rng = np.random.default_rng(4)
    for i in range(1, 6):
        arm = TwoLinkArm(table_params(i))
        lam = min(np.linalg.eigvalsh(arm.inertia(q))[0] for q in rng.uniform(-math.pi, math.pi, (10_000, 2)))
        assert lam > 0


def test_params_validation():
    with pytest.raises(ValueError):
        TwoLinkArmParams(0, 1, 1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        TwoLinkArmParams(1, 1, 1, 1, 1, 1, 1, 1, gravity_accel=-1)


# -- skew symmetry --------------------------------------------------------------------

def test_skew_constant_model_is_exact(unit_model):
    assert check_skew(unit_model, [0.1, 0.2], [1.0, -1.0]) == 0.0


def test_skew_two_link_random_states():
    rng = np.random.default_rng(5)
    for i in range(1, 6):
        arm = TwoLinkArm(table_params(i))
        res = max(check_skew(arm, rng.uniform(-math.pi, math.pi, 2), rng.uniform(-5, 5, 2)) for _ in range(200))
        assert res <= 1e-5


class _FlippedCoriolis(TwoLinkArm):
    def coriolis(self, q, qdot):
        return -super().coriolis(q, qdot)


def test_skew_detects_wrong_coriolis():
    arm = _FlippedCoriolis(table_params(1))
    assert check_skew(arm, [0.3, 1.0], [2.0, -1.5]) > 1e-2


def test_skew_rejects_bad_step(arm1):
    with pytest.raises(ValueError):
        check_skew(arm1, [0, 0], [0, 0], fd_step=0.0)


# -- bound estimation ------------------------------------------------------------------

def test_bounds_constant_inertia():
    b = estimate_bounds(ConstantInertiaModel(np.diag([2.0, 3.0])), (-1, 1), (-1, 1), samples=10)
    assert b.k_m_lower <= 2.0 and b.k_M_upper >= 3.0
    assert b.k_g == 0.0 and b.k_C == 0.0
    assert b.k_p is None


def test_bounds_cover_denser_grid(arm1):
    b = estimate_bounds(arm1, (-math.pi, math.pi), (-5, 5), samples=2000)
    # M depends on q2 only; the oracle scans 10x more points on a regular grid
    grid = np.linspace(-math.pi, math.pi, 20_001)
    eig = np.array([np.linalg.eigvalsh(arm1.inertia(np.array([0.0, q2]))) for q2 in grid])
    assert b.k_M_upper >= eig[:, 1].max()
    assert b.k_m_lower <= eig[:, 0].min()


def test_bounds_zero_gravity():
    p = TwoLinkArmParams(**{f: getattr(table_params(2), f) for f in TwoLinkArmParams.FIELDS}, gravity_accel=0.0)
    b = estimate_bounds(TwoLinkArm(p), (-1, 1), (-1, 1), samples=50)
    assert b.k_g == 0.0


def test_bounds_validation():
    with pytest.raises(ValueError):
        estimate_bounds(ConstantInertiaModel(np.eye(2)), (1, -1), (-1, 1))
    with pytest.raises(ValueError):
        estimate_bounds(ConstantInertiaModel(np.eye(2)), (-1, 1), (-1, 1), samples=0)
    full = dict(k_m_lower=1, k_M_upper=2, k_C=0, k_g=0, k_zeta=0, k_p=1, k_q=1, k_a=1, k_b=1)
    BoundConstants(**full).validate()
    with pytest.raises(ValueError):
        BoundConstants(**dict(full, k_m_lower=3)).validate()
    with pytest.raises(ValueError):
        BoundConstants(**dict(full, k_b=None)).validate()


def test_combine_bounds_is_worst_case():
    a = BoundConstants(k_m_lower=1.0, k_M_upper=2.0, k_C=0.5)
    b = BoundConstants(k_m_lower=0.5, k_M_upper=3.0, k_C=0.1)
    c = combine_bounds([a, b])
    assert (c.k_m_lower, c.k_M_upper, c.k_C, c.k_g) == (0.5, 3.0, 0.5, None)


def test_leader_bounds_hold_over_horizon():
    lead = ReferenceLeader()
    k_p, k_q = leader_bounds(lead, 5, 40.0)
    t = np.linspace(0, 40, 100_003)
    assert math.sqrt(5) * np.linalg.norm(lead.velocity(t), axis=1).max() <= k_p
    assert math.sqrt(5) * np.linalg.norm(lead.acceleration(t), axis=1).max() <= k_q


def test_leader_derivatives_are_consistent():
    lead = ReferenceLeader()
    t, h = np.linspace(0, 40, 57), 1e-5
    np.testing.assert_allclose((lead.position(t + h) - lead.position(t - h)) / (2 * h), lead.velocity(t), atol=1e-8)
    np.testing.assert_allclose((lead.velocity(t + h) - lead.velocity(t - h)) / (2 * h), lead.acceleration(t), atol=1e-8)
