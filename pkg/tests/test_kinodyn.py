
import numpy as np
import pytest

from modsynth.errors import ConfigurationError
from modsynth.kinodyn import (hollow_cylinder_x, jacobian_dot, joint_accelerations, joint_velocities,
                              linear_jacobian, module_inertia, pinv, rnea, solid_cylinder_z, torque_margin,
                              waypoint_dynamics)
from modsynth.model import ActuatorSpec, Design, LinkSpec, forward_kinematics
from oracles import mc_module_inertia, power_balance_error


def rand_design(rng, n):
    return Design(rng.normal(size=3) * 0.1, rng.uniform(0, 2 * np.pi, n), np.sort(rng.uniform(0.1, 0.4, n)))


def fd_jacobian(d, q, h=1e-6):
    cols = []
    for k in range(len(q)):
        e = np.zeros(len(q))
        e[k] = h
        cols.append((forward_kinematics(d, q + e).ef - forward_kinematics(d, q - e).ef) / (2 * h))
    return np.column_stack(cols)


class TestJacobian:
    def test_unit_circle(self):
        d = Design((0, 0, 0), (0.0,), (1.0,))
        np.testing.assert_allclose(linear_jacobian(d, [0.0])[:, 0], (0, 1, 0), atol=1e-15)

    def test_deterministic(self):
        d = rand_design(np.random.default_rng(1), 4)
        q = np.ones(4)
        assert linear_jacobian(d, q).tobytes() == linear_jacobian(d, q).tobytes()

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_central_difference(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        d = rand_design(rng, n)
        q = rng.uniform(-np.pi, np.pi, n)
        J = linear_jacobian(d, q)
        Jf = fd_jacobian(d, q)
        assert np.max(np.abs(J - Jf)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


class TestPseudoInverse:
    def test_orthonormal(self):
        qd, sing = joint_velocities(np.array([[1, 0], [0, 1], [0, 0]], float), (1, 2, 0))
        np.testing.assert_allclose(qd, (1, 2), atol=1e-15)

    def test_zero(self):
        qd, _ = joint_velocities(np.random.default_rng(0).normal(size=(3, 4)), np.zeros(3))
        np.testing.assert_array_equal(qd, 0)

    def test_minimum_norm(self):
        rng = np.random.default_rng(3)
        J = rng.normal(size=(3, 5))
        v = rng.normal(size=3)
        qd, sing = joint_velocities(J, v)
        assert not sing
        np.testing.assert_allclose(J @ qd, v, atol=1e-9)
        # normal-equation oracle: q = J^T (J J^T)^-1 v
        np.testing.assert_allclose(qd, J.T @ np.linalg.solve(J @ J.T, v), atol=1e-9)

    def test_singular_flag(self):
        J = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
        _, sing = pinv(J)
        assert sing


class TestAccelerations:
    def test_rest(self):
        d = rand_design(np.random.default_rng(2), 3)
        qdd, _ = joint_accelerations(d, np.ones(3), np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(qdd, 0, atol=1e-15)

    def test_centripetal(self):
        d = Design((0, 0, 0), (0.0,), (1.0,))
        qdd, _ = joint_accelerations(d, [0.0], [1.0], (-1.0, 0, 0))
        assert qdd[0] == pytest.approx(0.0, abs=1e-8)

    def test_jdot_matches_time_derivative(self):
        rng = np.random.default_rng(4)
        d = rand_design(rng, 3)
        q, qd = rng.normal(size=3), rng.normal(size=3)
        h = 1e-6
        num = (linear_jacobian(d, q + h * qd) - linear_jacobian(d, q - h * qd)) / (2 * h)
        np.testing.assert_allclose(jacobian_dot(d, q, qd), num, atol=1e-7)

    def test_numerical_differentiation(self):
        # EF path x(t) generated by a 3-DOF joint motion, then q_dot(t) recovered
        # through the pseudo-inverse and differentiated numerically.
        rng = np.random.default_rng(5)
        d = rand_design(rng, 3)
        w, ph = rng.uniform(0.5, 1.5, 3), rng.uniform(0, 1, 3)

        def q_of(t):
            return 0.5 * np.sin(w * t + ph) + np.array([0.3, 1.0, -0.8])

        def ef(t):
            return forward_kinematics(d, q_of(t)).ef

        t, h = 0.7, 1e-4
        v = lambda s: (ef(s + 1e-5) - ef(s - 1e-5)) / 2e-5
        a = (ef(t + h) - 2 * ef(t) + ef(t - h)) / h ** 2
        qd_t = joint_velocities(linear_jacobian(d, q_of(t)), v(t))[0]
        qdd, _ = joint_accelerations(d, q_of(t), qd_t, a)
        num = (joint_velocities(linear_jacobian(d, q_of(t + h)), v(t + h))[0]
               - joint_velocities(linear_jacobian(d, q_of(t - h)), v(t - h))[0]) / (2 * h)
        np.testing.assert_allclose(qdd, num, atol=1e-4)


class TestInertia:
    def test_empty_link(self):
        a, l = ActuatorSpec(), LinkSpec()
        it = module_inertia(a, l, 0.0)
        assert it.mass == a.mass
        Ic = solid_cylinder_z(a.mass, a.body_radius, a.body_height)
        np.testing.assert_allclose(it.about_com(), Ic, atol=1e-15)

    def test_hollow_limit(self):
        m, rad = 2.0, 0.3
        assert hollow_cylinder_x(m, 0.0, rad, 1.0)[0, 0] == pytest.approx(solid_cylinder_z(m, rad, 1.0)[2, 2])
        assert hollow_cylinder_x(m, 0.1, 0.2, 1.0)[0, 0] == pytest.approx(m * (0.01 + 0.04) / 2)

    @pytest.mark.parametrize("r", [0.1, 0.3])
    def test_symmetric_psd(self, r):
        it = module_inertia(ActuatorSpec(), LinkSpec(), r)
        np.testing.assert_allclose(it.matrix, it.matrix.T, atol=1e-12)
        ev = np.linalg.eigvalsh(it.about_com())
        assert np.all(ev >= 0)
        a, b, c = ev
        assert a + b >= c - 1e-15

    def test_monte_carlo(self):
        it = module_inertia(ActuatorSpec(), LinkSpec(), 0.25)
        m, com, I = mc_module_inertia(ActuatorSpec(), LinkSpec(), 0.25, n=400_000)
        assert m == pytest.approx(it.mass)
        assert np.linalg.norm(I - it.matrix) / np.linalg.norm(it.matrix) < 0.01
        np.testing.assert_allclose(com, it.com, atol=2e-3)

    def test_parallel_axis_two_frames(self):
        it = module_inertia(ActuatorSpec(), LinkSpec(), 0.2)
        shift = np.array([0.05, -0.02, 0.1])
        # about a third point computed directly and via the COM
        c = it.com - shift
        via_com = it.about_com() + it.mass * (c @ c * np.eye(3) - np.outer(c, c))
        o = -shift
        direct = it.matrix + it.mass * ((o @ o) * np.eye(3) - np.outer(o, o)) \
            - it.mass * ((it.com @ it.com) * np.eye(3) - np.outer(it.com, it.com)) \
            + it.mass * ((c @ c) * np.eye(3) - np.outer(c, c)) \
            - it.mass * ((o @ o) * np.eye(3) - np.outer(o, o))
        np.testing.assert_allclose(via_com, direct, atol=1e-15)


class TestRNEA:
    def test_zero(self):
        d = rand_design(np.random.default_rng(0), 4)
        tau = rnea(d, np.ones(4), np.zeros(4), np.zeros(4), np.zeros(6), gravity=(0, 0, 0))
        assert np.all(tau == 0.0)

    def test_vertical_axis_no_gravity_torque(self):
        d = Design((0, 0, 0), (0.0,), (0.4,))
        assert rnea(d, [0.3], [0], [0])[0] == pytest.approx(0.0, abs=1e-15)

    def test_static_one_link_horizontal_axis(self):
        # the first axis is vertical by construction, so tilt gravity instead:
        # gravity along -y makes the joint axis horizontal w.r.t. gravity.
        a, l = ActuatorSpec(), LinkSpec()
        r = 0.4
        d = Design((0, 0, 0), (0.0,), (r,), a, l)
        it = module_inertia(a, l, r)
        g = 9.81
        tau = rnea(d, [0.0], [0.0], [0.0], gravity=(0, -g, 0))[0]
        # lever arm along x: actuator COM on the axis (0), link COM at r/2
        from modsynth.kinodyn import link_mass
        expected = g * (a.mass * 0.0 + link_mass(l, r) * r / 2)
        assert tau == pytest.approx(expected, abs=1e-9)
        assert it.com[0] * it.mass == pytest.approx(link_mass(l, r) * r / 2)

    def test_static_three_link_closed_form(self):
        a, l = ActuatorSpec(), LinkSpec()
        from modsynth.kinodyn import link_mass
        r = (0.2, 0.3, 0.25)
        d = Design((0, 0, 0), (np.pi / 2, 0, 0), r, a, l)
        tau = rnea(d, [0, 0, 0], [0] * 3, [0] * 3)
        m2, m3 = link_mass(l, r[1]), link_mass(l, r[2])
        expected = 9.81 * (m2 * r[1] / 2 + a.mass * r[1] + m3 * (r[1] + r[2] / 2))
        assert abs(tau[1]) == pytest.approx(expected, abs=1e-9)

    def test_wrench_linearity(self):
        rng = np.random.default_rng(8)
        d = rand_design(rng, 4)
        q, qd, qdd = rng.normal(size=(3, 4))
        F1, F2 = rng.normal(size=(2, 6))
        t0 = rnea(d, q, qd, qdd, np.zeros(6))
        t1, t2 = rnea(d, q, qd, qdd, F1), rnea(d, q, qd, qdd, F2)
        t12 = rnea(d, q, qd, qdd, F1 + F2)
        np.testing.assert_allclose(t12 - t0, (t1 - t0) + (t2 - t0), atol=1e-9)

    def test_end_force_static_jacobian_transpose(self):
        rng = np.random.default_rng(9)
        d = rand_design(rng, 3)
        q = rng.normal(size=3)
        F = np.concatenate([rng.normal(size=3), np.zeros(3)])
        tau = rnea(d, q, np.zeros(3), np.zeros(3), F, gravity=(0, 0, 0))
        # the payload pushes on the EF; the joints must hold -J^T f
        np.testing.assert_allclose(tau, -linear_jacobian(d, q).T @ F[:3], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_power_balance(self, seed):
        rel = power_balance_error(seed)
        assert rel < 1e-4


class TestTorqueMargin:
    def test_paper_values(self):
        assert torque_margin((2, -3), 8, 2) == 2

    def test_zero(self):
        assert torque_margin((0, 0), 8, 2) == 8

    def test_violation(self):
        assert torque_margin((4.1,), 8, 2) == pytest.approx(-0.2)

    def test_beta_below_one(self):
        with pytest.raises(ConfigurationError):
            torque_margin((1,), 8, 0.5)


def test_waypoint_dynamics_consistent():
    rng = np.random.default_rng(11)
    d = rand_design(rng, 4)
    q, v, a = rng.normal(size=4), rng.normal(size=3) * 0.1, rng.normal(size=3) * 0.1
    qd, qdd, tau, _ = waypoint_dynamics(d, q, v, a, np.zeros(6))
    np.testing.assert_allclose(linear_jacobian(d, q) @ qd, v, atol=1e-9)
    np.testing.assert_allclose(tau, rnea(d, q, qd, qdd), atol=1e-12)
