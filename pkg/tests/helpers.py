import numpy as np

from modsynth.geom import WallObstacle


def random_walls(rng, k):
    out = []
    for _ in range(k):
        c0 = rng.normal(size=3) * 0.3
        e1 = rng.normal(size=3)
        e1 *= rng.uniform(0.2, 0.6) / np.linalg.norm(e1)
        e2 = np.cross(e1, rng.normal(size=3))
        e2 *= rng.uniform(0.2, 0.6) / np.linalg.norm(e2)
        out.append(WallObstacle(np.array([c0, c0 + e1, c0 + e1 + e2, c0 + e2])).packed)
    return np.ascontiguousarray(out)


def sphere_on_trajectory(task, plan, rad, clearance):
    """A small sphere sitting on the fitted spline but clear of the RRT* polyline.

    Candidates are tried outward from the middle of the trajectory.  Returns
    the task with the sphere added, or None if no spot qualifies.
    """
    from modsynth.geom import SphereObstacle
    from modsynth.model import Task
    from modsynth.plan import check_trajectory_collision, sample_many

    traj = plan.trajectory
    ts = np.linspace(traj.t0, traj.t1, 4001)
    P, _, _ = sample_many(traj, ts)
    s = np.linspace(0, 1, 400)[:, None]
    for k in np.argsort(np.abs(np.linspace(-1, 1, len(ts))), kind="stable"):
        c = P[k]
        if any(np.linalg.norm(tp.p - c) <= 0.05 for tp in task.points):
            continue
        if not all(np.min(np.linalg.norm(a + s * (b - a) - c, axis=1)) > rad + clearance
                   for a, b in zip(plan.path, plan.path[1:])):
            continue
        moved = Task(list(task.points), spheres=list(task.spheres) + [SphereObstacle(c, rad)],
                     walls=list(task.walls), base=task.base)
        if not check_trajectory_collision(traj, moved):
            return moved
    return None
