import math

import numpy as np
import pytest

from modsynth.errors import DegenerateLegError, PlanningFailure
from modsynth.geom import SphereObstacle, WallObstacle
from modsynth.model import Task, TaskPoint
from modsynth.plan import (PlannerConfig, Waypoint, assign_times_loads, check_trajectory_collision, fit_trajectory,
                           path_length, rrt_star, sample_many, sample_trajectory)
from scenes import cabinet

F0 = np.zeros(6)


def wp(p, t, F=F0):
    return Waypoint(np.array(p, dtype=float), float(t), np.asarray(F, dtype=float))


def blocked_task():
    return Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 0, 0), 4.0)],
                spheres=[SphereObstacle((0.5, 0.0, 0.0), 0.2)])


def dense_min_clearance(path, sphere, n=400):
    worst = math.inf
    for a, b in zip(path, path[1:]):
        s = np.linspace(0, 1, n)[:, None]
        pts = a + s * (b - a)
        worst = min(worst, float(np.min(np.linalg.norm(pts - sphere.c, axis=1)) - sphere.rad))
    return worst


class TestRRT:
    def test_free_space_straight(self):
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 2, 3), 1.0)])
        path = rrt_star(t, PlannerConfig())
        assert len(path) == 2
        np.testing.assert_array_equal(path[0], (0, 0, 0))
        np.testing.assert_array_equal(path[1], (1, 2, 3))

    def test_detour_clearance(self):
        t = blocked_task()
        cfg = PlannerConfig(rng_seed=3)
        path = rrt_star(t, cfg)
        assert len(path) > 2
        assert dense_min_clearance(path, t.spheres[0]) >= cfg.ef_clearance - 1e-12

    def test_membership_in_order(self):
        t = cabinet()
        path = rrt_star(t, PlannerConfig(rng_seed=1))
        idx = []
        for tp in t.points:
            idx.append(next(i for i, p in enumerate(path) if np.array_equal(p, tp.p) and (not idx or i > idx[-1])))
        assert idx == sorted(idx) and idx[0] == 0 and idx[-1] == len(path) - 1
        assert len(path) >= len(t.points)

    def test_no_segment_straddles_wall(self):
        t = cabinet()
        path = rrt_star(t, PlannerConfig(rng_seed=2))
        from modsynth.geom import Segment3, seg_wall_intersect
        for a, b in zip(path, path[1:]):
            assert not any(seg_wall_intersect(Segment3.of(a, b), w) for w in t.walls)

    def test_deterministic(self):
        a = rrt_star(blocked_task(), PlannerConfig(rng_seed=7))
        b = rrt_star(blocked_task(), PlannerConfig(rng_seed=7))
        assert np.array(a).tobytes() == np.array(b).tobytes()

    def test_budget_monotone(self):
        for seed in range(3):
            short = path_length(rrt_star(blocked_task(), PlannerConfig(max_samples=2000, rng_seed=seed)))
            long = path_length(rrt_star(blocked_task(), PlannerConfig(max_samples=20000, rng_seed=seed)))
            assert long <= short

    def test_failure_names_leg(self):
        # the third point sits inside a closed box, so only the second leg (index 1) fails
        from scenes import box_walls
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 0, 0), 1.0), TaskPoint((2, 0, 0), 2.0)],
                 walls=box_walls(1.8, 2.2, -0.2, 0.2, -0.2, 0.2, open_face=None))
        with pytest.raises(PlanningFailure) as ei:
            rrt_star(t, PlannerConfig(max_samples=200))
        assert ei.value.leg == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PlannerConfig(steer_step=0)


class TestAssign:
    def test_halfway(self):
        F1 = np.arange(6.0)
        t = Task([TaskPoint((0, 0, 0), 0.0, F1), TaskPoint((2, 0, 0), 4.0)])
        out = assign_times_loads(t, [np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0])])
        assert out[1].t == 2.0
        np.testing.assert_array_equal(out[1].F, F1)
        assert out[2].t == 4.0 and np.all(out[2].F == 0)

    def test_identity(self):
        t = cabinet()
        out = assign_times_loads(t, [tp.p for tp in t.points])
        assert [w.t for w in out] == [tp.t for tp in t.points]
        for w, tp in zip(out, t.points):
            np.testing.assert_array_equal(w.p, tp.p)
            np.testing.assert_array_equal(w.F, tp.F)

    def test_quarter_of_three_segments(self):
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((1, 1, 0), 8.0)])
        path = [np.array(p, float) for p in [(0, 0, 0), (1, 0, 0), (1, 1, 0)]]
        # leg length 2; insert a point at 25% arc length
        path.insert(1, np.array([0.5, 0, 0]))
        out = assign_times_loads(t, path)
        assert out[1].t == pytest.approx(2.0)

    def test_degenerate_leg(self):
        t = Task([TaskPoint((0, 0, 0), 0.0), TaskPoint((0, 0, 0), 1.0), TaskPoint((1, 0, 0), 2.0)])
        with pytest.raises(DegenerateLegError):
            assign_times_loads(t, [np.zeros(3), np.zeros(3), np.array([1.0, 0, 0])])

    def test_preserves_task_points(self):
        t = cabinet()
        path = rrt_star(t, PlannerConfig(rng_seed=4))
        out = assign_times_loads(t, path)
        for tp in t.points:
            w = next(w for w in out if np.array_equal(w.p, tp.p))
            assert w.t == tp.t and np.array_equal(w.F, tp.F)
        assert all(b.t > a.t for a, b in zip(out, out[1:]))


class TestSpline:
    def test_rest_to_rest(self):
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 1)])
        for t in np.linspace(0, 1, 11):
            p, v, a = sample_trajectory(tr, t)
            assert p[0] == pytest.approx(3 * t * t - 2 * t ** 3, abs=1e-14)
        assert sample_trajectory(tr, 0.5)[1][0] == pytest.approx(1.5, abs=1e-14)

    def test_constant(self):
        tr = fit_trajectory([wp((1, 2, 3), 0), wp((1, 2, 3), 1), wp((1, 2, 3), 3)])
        for t in np.linspace(0, 3, 13):
            p, v, a = sample_trajectory(tr, t)
            np.testing.assert_allclose(p, (1, 2, 3), atol=1e-15)
            assert np.all(np.abs(v) < 1e-15) and np.all(np.abs(a) < 1e-15)

    def test_random_knots(self):
        rng = np.random.default_rng(0)
        ts = np.cumsum(rng.uniform(0.2, 1.0, 5))
        ts -= ts[0]
        wps = [wp(rng.normal(size=3), t) for t in ts]
        tr = fit_trajectory(wps)
        for w in wps:
            np.testing.assert_allclose(sample_trajectory(tr, w.t)[0], w.p, atol=1e-9)
        for t in ts[1:-1]:
            left, right = sample_trajectory(tr, t, "left"), sample_trajectory(tr, t, "right")
            for l, r in zip(left, right):
                np.testing.assert_allclose(l, r, atol=1e-9)
        assert np.linalg.norm(sample_trajectory(tr, ts[0])[1]) <= 1e-12
        assert np.linalg.norm(sample_trajectory(tr, ts[-1])[1]) <= 1e-12

    def test_finite_difference(self):
        rng = np.random.default_rng(1)
        wps = [wp(rng.normal(size=3), t) for t in (0.0, 0.7, 1.5, 2.0)]
        tr = fit_trajectory(wps)
        h = 1e-6
        for t in rng.uniform(0.01, 1.99, 10):
            _, v, a = sample_trajectory(tr, t)
            pp, vp, _ = sample_trajectory(tr, t + h)
            pm, vm, _ = sample_trajectory(tr, t - h)
            np.testing.assert_allclose(v, (pp - pm) / (2 * h), atol=1e-6)
            np.testing.assert_allclose(a, (vp - vm) / (2 * h), atol=1e-5)

    def test_sample_many_matches(self):
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 1, 0), 1), wp((0, 2, 1), 2)])
        ts = np.linspace(0, 2, 9)
        P, V, A = sample_many(tr, ts)
        for i, t in enumerate(ts):
            p, v, a = sample_trajectory(tr, t)
            np.testing.assert_allclose(P[i], p, atol=1e-15)
            np.testing.assert_allclose(V[i], v, atol=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 0)])
        with pytest.raises(ValueError):
            fit_trajectory([wp((0, 0, 0), 0)])
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 1)])
        with pytest.raises(ValueError):
            sample_trajectory(tr, 1.5)


class TestTrajectoryCollision:
    def test_free(self):
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 1)])
        assert check_trajectory_collision(tr, Task([TaskPoint((0, 0, 0), 0.0)]))

    def test_overshoot(self):
        wps = [wp((0, 0, 0), 0), wp((1, 0, 0), 1), wp((1, 1, 0), 1.3)]
        tr = fit_trajectory(wps)
        ts = np.linspace(0, 1.3, 20001)
        P, _, _ = sample_many(tr, ts)
        i = int(np.argmax(P[:, 0]))
        assert P[i, 0] > 1.01  # the spline overshoots the corner
        sphere = SphereObstacle(P[i] + np.array([0.02, 0, 0]), 0.025)
        # the polyline itself clears the sphere
        for a, b in zip(wps, wps[1:]):
            s = np.linspace(0, 1, 2001)[:, None]
            assert np.min(np.linalg.norm(a.p + s * (b.p - a.p) - sphere.c, axis=1)) > sphere.rad
        task = Task([TaskPoint((0, 0, 0), 0.0)], spheres=[sphere])
        assert not check_trajectory_collision(tr, task)

    def test_wall_between_samples(self):
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 1)])
        wall = WallObstacle(np.array([(0.5, -1, -1), (0.5, 1, -1), (0.5, 1, 1), (0.5, -1, 1)], float))
        task = Task([TaskPoint((0, 0, 0), 0.0)], walls=[wall])
        # samples at t = 1/3 and 2/3 fall on either side of the plane x = 0.5
        assert not check_trajectory_collision(tr, task, dt=0.4)

    def test_bad_dt(self):
        tr = fit_trajectory([wp((0, 0, 0), 0), wp((1, 0, 0), 1)])
        with pytest.raises(ValueError):
            check_trajectory_collision(tr, Task([TaskPoint((0, 0, 0), 0.0)]), dt=0)
