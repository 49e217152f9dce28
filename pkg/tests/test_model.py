import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modsynth.model import (BaseRegion, Design, Task, TaskPoint, dh_transform, forward_kinematics,
                            state_segments, validate_task)
from modsynth.geom import SphereObstacle
from oracles import frames
from scenes import cabinet

angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def rand_design(rng, n, d=0.1):
    from modsynth.model import ActuatorSpec
    return Design(rng.normal(size=3) * 0.1, rng.uniform(0, 2 * np.pi, n), np.sort(rng.uniform(0.1, 0.4, n)),
                  ActuatorSpec(d=d))


class TestDH:
    def test_identity(self):
        np.testing.assert_array_equal(dh_transform(0, 0, 0, 0), np.eye(4))

    def test_quarter_turn(self):
        T = dh_transform(math.pi / 2, 0, 1, 0)
        np.testing.assert_allclose(T[:, 3], [0, 1, 0, 1], atol=1e-15)

    def test_symbolic_product(self):
        th, d, a, al = 0.3, 0.1, 0.5, math.pi / 3
        Rz = np.eye(4)
        Rz[:2, :2] = [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
        Tz = np.eye(4)
        Tz[2, 3] = d
        Tx = np.eye(4)
        Tx[0, 3] = a
        Rx = np.eye(4)
        Rx[1:3, 1:3] = [[math.cos(al), -math.sin(al)], [math.sin(al), math.cos(al)]]
        np.testing.assert_allclose(dh_transform(th, d, a, al), Rz @ Tz @ Tx @ Rx, atol=1e-15)

    @given(angle, st.floats(-1, 1), st.floats(-1, 1), angle)
    def test_rotation_orthonormal(self, th, d, a, al):
        T = dh_transform(th, d, a, al)
        R = T[:3, :3]
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(T[3], [0, 0, 0, 1])


class TestFK:
    def test_one_dof_example(self):
        d = Design((0, 0, 0), (0.0,), (0.5,))
        S = forward_kinematics(d, [0.0]).s
        np.testing.assert_allclose(S, [(0, 0, 0), (0, 0, 0.1), (0.5, 0, 0.1)], atol=1e-15)

    def test_deterministic(self):
        d = rand_design(np.random.default_rng(0), 4)
        a = forward_kinematics(d, np.zeros(4)).s
        b = forward_kinematics(d, np.zeros(4)).s
        assert a.tobytes() == b.tobytes()

    @given(angle, angle, st.floats(0.1, 0.5), st.floats(0.1, 0.5))
    def test_planar_law_of_cosines(self, t1, t2, r1, r2):
        d = Design((0, 0, 0), (0.0, 0.0), (r1, r2))
        ef = forward_kinematics(d, [t1, t2]).ef
        assert math.hypot(ef[0], ef[1]) == pytest.approx(math.sqrt(r1 * r1 + r2 * r2 + 2 * r1 * r2 * math.cos(t2)), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            forward_kinematics(Design((0, 0, 0), (0.0,), (0.5,)), [0.0, 1.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_rigid_body_and_frame0(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        d = rand_design(rng, n)
        q = rng.uniform(-np.pi, np.pi, n)
        S = forward_kinematics(d, q).s
        for k in range(1, n + 1):
            assert np.linalg.norm(S[2 * k] - S[2 * k - 1]) == pytest.approx(d.r[k - 1], abs=1e-9)
            assert np.linalg.norm(S[2 * k - 1] - S[2 * k - 2]) == pytest.approx(d.actuator.d, abs=1e-9)
        np.testing.assert_allclose(S[1] - S[0], [0, 0, d.actuator.d], atol=1e-15)
        # matches the chained DH transforms
        Fs = frames(d, q)
        for k in range(n + 1):
            np.testing.assert_allclose(S[2 * k], Fs[k][:3, 3], atol=1e-12)

    @given(st.lists(angle, min_size=3, max_size=3))
    def test_planar_reduction(self, q):
        from modsynth.model import ActuatorSpec
        d = Design((0.1, 0.2, 0.3), (0, 0, 0), (0.2, 0.3, 0.3), ActuatorSpec(d=1e-9))
        S = forward_kinematics(d, q).s
        np.testing.assert_allclose(S[:, 2], 0.3, atol=1e-8)


class TestSegments:
    def test_labels(self):
        S = forward_kinematics(Design((0, 0, 0), (0.0,), (0.5,)), [0.0])
        segs = state_segments(S)
        assert [l for l, _ in segs] == ["act_1", "link_1"]
        np.testing.assert_allclose(segs[1][1].b, (0.5, 0, 0.1))

    def test_count_and_degenerate(self):
        S = forward_kinematics(Design((0, 0, 0), (0.0, 1.0), (0.0, 0.3)), [0.0, 0.0])
        segs = state_segments(S)
        assert [l for l, _ in segs] == ["act_1", "link_1", "act_2", "link_2"]
        assert segs[1][1].length == 0.0


class TestValidate:
    def test_cabinet_ok(self):
        assert validate_task(cabinet()) == []

    def test_first_time(self):
        t = Task([TaskPoint((0, 0, 0), 0.5), TaskPoint((1, 0, 0), 1.0)])
        assert validate_task(t) == ["first timestamp must be 0"]

    def test_inside_sphere(self):
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 0, 0), 1.0)], spheres=[SphereObstacle((1, 0, 0), 0.1)])
        assert validate_task(t) == ["task point 2 inside obstacle 1"]

    def test_not_increasing(self):
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 0, 0), 0.0)])
        assert any("strictly" in p for p in validate_task(t))

    def test_inverted_base(self):
        t = Task([TaskPoint((0, 0, 0), 0.0)], base=BaseRegion(1, 0, 0, 0, 0))
        assert validate_task(t) == ["base region bounds are inverted"]
