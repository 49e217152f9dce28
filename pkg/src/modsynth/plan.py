"""End-effector path search (RRT*), time/load assignment and spline trajectories."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from modsynth import kernels
from modsynth.errors import DegenerateLegError, PlanningFailure
from modsynth.geom import pack_spheres, pack_walls
from modsynth.model import Task


@dataclass(frozen=True)
class Waypoint:
    p: np.ndarray
    t: float
    F: np.ndarray


@dataclass(frozen=True)
class PlannerConfig:
    max_samples: int = 1500
    steer_step: float = 0.2
    rewire_radius_gamma: float = 1.0
    goal_tolerance: float = 0.2
    ef_clearance: float = 0.04
    rng_seed: int = 0
    goal_bias: float = 0.1
    bounds_margin: float = 0.3
    # accept a collision-free straight leg without growing a tree
    shortcut: bool = True

    def __post_init__(self):
        for name in ("max_samples", "steer_step", "rewire_radius_gamma", "goal_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ef_clearance < 0:
            raise ValueError("ef_clearance must be non-negative")


class _FreeSpace:
    """Straight-segment validity against inflated spheres and thin walls."""

    def __init__(self, task: Task, clearance: float):
        self.spheres = pack_spheres(task.spheres)
        self.walls = pack_walls(task.walls)
        self.clearance = clearance

    def segment_free(self, a, b) -> bool:
        pts = np.ascontiguousarray([a, b], dtype=float)
        if self.spheres.shape[0] and kernels.sphere_clearances(pts, self.spheres, self.clearance).min() <= 0.0:
            return False
        if self.walls.shape[0] and kernels.wall_terms(pts, self.walls)[0].max() > 0.0:
            return False
        return True

    def point_free(self, p) -> bool:
        if not self.spheres.shape[0]:
            return True
        d = np.linalg.norm(self.spheres[:, :3] - p, axis=1)
        return bool(np.all(d >= self.spheres[:, 3] + self.clearance))


def _sampling_box(task: Task, margin: float):
    pts = [tp.p for tp in task.points]
    lo = np.min(pts, axis=0)
    hi = np.max(pts, axis=0)
    for o in task.spheres:
        lo = np.minimum(lo, o.c - o.rad)
        hi = np.maximum(hi, o.c + o.rad)
    return lo - margin, hi + margin


def _plan_leg(start, goal, free: _FreeSpace, lo, hi, cfg: PlannerConfig, rng, leg: int):
    if cfg.shortcut and free.segment_free(start, goal):
        return [start, goal]
    N = cfg.max_samples + 1
    nodes = np.empty((N, 3))
    cost = np.empty(N)
    parent = np.full(N, -1, dtype=np.int64)
    children = [[] for _ in range(N)]
    nodes[0] = start
    cost[0] = 0.0
    n = 1
    goal_links = []
    for _ in range(cfg.max_samples):
        # fixed number of draws per iteration keeps runs with different budgets in step
        u = rng.random()
        x = rng.uniform(lo, hi)
        if u < cfg.goal_bias:
            x = goal
        d2 = np.sum((nodes[:n] - x) ** 2, axis=1)
        near = int(np.argmin(d2))
        dist = math.sqrt(d2[near])
        if dist < 1e-12:
            continue
        new = nodes[near] + (x - nodes[near]) * min(1.0, cfg.steer_step / dist)
        if not free.segment_free(nodes[near], new):
            continue
        radius = min(cfg.rewire_radius_gamma * (math.log(n + 1) / (n + 1)) ** (1 / 3), cfg.steer_step)
        dn = np.sqrt(np.sum((nodes[:n] - new) ** 2, axis=1))
        nbrs = np.flatnonzero(dn <= radius)
        best, best_cost = near, cost[near] + dn[near]
        for j in nbrs[np.argsort(cost[nbrs] + dn[nbrs], kind="stable")]:
            c = cost[j] + dn[j]
            if c >= best_cost:
                break
            if free.segment_free(nodes[j], new):
                best, best_cost = int(j), c
                break
        k = n
        nodes[k] = new
        cost[k] = best_cost
        parent[k] = best
        children[best].append(k)
        n += 1
        for j in nbrs:
            c = best_cost + dn[j]
            if c < cost[j] - 1e-12 and free.segment_free(new, nodes[j]):
                children[parent[j]].remove(j)
                parent[j] = k
                children[k].append(int(j))
                delta = cost[j] - c
                stack = [int(j)]
                while stack:
                    m = stack.pop()
                    cost[m] -= delta
                    stack.extend(children[m])
        dg = float(np.linalg.norm(goal - new))
        if dg <= cfg.goal_tolerance and free.segment_free(new, goal):
            goal_links.append(k)
    if not goal_links:
        raise PlanningFailure(leg)
    links = np.array(goal_links)
    total = cost[links] + np.linalg.norm(nodes[links] - goal, axis=1)
    k = int(links[np.argmin(total)])
    path = []
    while k >= 0:
        path.append(nodes[k].copy())
        k = int(parent[k])
    path.reverse()
    path[0] = start
    path.append(goal)
    return path


def rrt_star(task: Task, cfg: PlannerConfig):
    """Collision-free polyline through every task point, in order.

    Each leg is planned by its own RRT* tree; legs share the seeded
    generator in sequence, so the result is fully determined by ``cfg``.
    """
    free = _FreeSpace(task, cfg.ef_clearance)
    lo, hi = _sampling_box(task, cfg.bounds_margin)
    rng = np.random.default_rng(cfg.rng_seed)
    out = [task.points[0].p.copy()]
    for i in range(len(task.points) - 1):
        a, b = task.points[i].p, task.points[i + 1].p
        if np.array_equal(a, b):
            continue
        leg = _plan_leg(a, b, free, lo, hi, cfg, rng, i)
        out.extend(p for p in leg[1:])
    return out


def path_length(path) -> float:
    p = np.asarray(path)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def assign_times_loads(task: Task, path) -> list:
    """Timestamp and load for every path point; task points keep their own."""
    path = [np.asarray(p, dtype=float) for p in path]
    idx = []
    j = 0
    for tp in task.points:
        while j < len(path) and not np.array_equal(path[j], tp.p):
            j += 1
        if j == len(path):
            raise ValueError("path does not visit the task points in order")
        idx.append(j)
    out = []
    for i, tp in enumerate(task.points):
        out.append(Waypoint(tp.p.copy(), tp.t, tp.F.copy()))
        if i + 1 == len(task.points):
            break
        leg = path[idx[i]:idx[i + 1] + 1]
        seglen = np.linalg.norm(np.diff(np.asarray(leg), axis=0), axis=1) if len(leg) > 1 else np.zeros(0)
        total = float(seglen.sum())
        nxt = task.points[i + 1]
        if total == 0.0:
            if nxt.t != tp.t and len(leg) > 1:
                raise DegenerateLegError(f"leg {i + 1} has zero length but spans {nxt.t - tp.t} s")
            continue
        arc = np.cumsum(seglen)
        for m in range(1, len(leg) - 1):
            t = tp.t + (nxt.t - tp.t) * arc[m - 1] / total
            out.append(Waypoint(leg[m].copy(), float(t), tp.F.copy()))
    times = [w.t for w in out]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DegenerateLegError("assigned timestamps are not strictly increasing")
    return out


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """Per-axis cubic pieces; ``coeffs[axis, k, j]`` multiplies (t - knots[j])**(3 - k)."""

    knots: np.ndarray
    coeffs: np.ndarray

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def t1(self) -> float:
        return float(self.knots[-1])


def fit_trajectory(waypoints) -> PiecewiseTrajectory:
    """Clamped cubic spline per coordinate: C2 at interior knots, zero end velocity."""
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    t = np.array([w.t for w in waypoints], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("waypoint timestamps must be strictly increasing")
    P = np.array([w.p for w in waypoints], dtype=float)
    cs = CubicSpline(t, P, axis=0, bc_type="clamped")
    # cs.c has shape (4, m, 3)
    return PiecewiseTrajectory(t.copy(), np.ascontiguousarray(np.transpose(cs.c, (2, 0, 1))))


def _piece(traj, t, j):
    h = t - traj.knots[j]
    c = traj.coeffs[:, :, j]
    p = ((c[:, 0] * h + c[:, 1]) * h + c[:, 2]) * h + c[:, 3]
    v = (3 * c[:, 0] * h + 2 * c[:, 1]) * h + c[:, 2]
    a = 6 * c[:, 0] * h + 2 * c[:, 1]
    return p, v, a


def sample_trajectory(traj: PiecewiseTrajectory, t: float, side: str = "right"):
    """Position, velocity and acceleration at ``t``.

    At an interior knot ``side`` picks the piece that starts ('right') or
    ends ('left') there.
    """
    if not traj.t0 <= t <= traj.t1:
        raise ValueError(f"t={t} outside [{traj.t0}, {traj.t1}]")
    m = len(traj.knots) - 1
    j = int(np.searchsorted(traj.knots, t, side="left" if side == "left" else "right")) - 1
    j = min(max(j, 0), m - 1)
    return _piece(traj, t, j)


def sample_many(traj: PiecewiseTrajectory, ts):
    ts = np.asarray(ts, dtype=float)
    m = len(traj.knots) - 1
    j = np.clip(np.searchsorted(traj.knots, ts, side="right") - 1, 0, m - 1)
    h = ts - traj.knots[j]
    c = traj.coeffs[:, :, j]  # (3, 4, n)
    p = ((c[:, 0] * h + c[:, 1]) * h + c[:, 2]) * h + c[:, 3]
    v = (3 * c[:, 0] * h + 2 * c[:, 1]) * h + c[:, 2]
    a = 6 * c[:, 0] * h + 2 * c[:, 1]
    return p.T, v.T, a.T


def default_dt(traj: PiecewiseTrajectory) -> float:
    return (traj.t1 - traj.t0) / 2000


def check_trajectory_collision(traj: PiecewiseTrajectory, task: Task, dt: float = None,
                               clearance: float = 0.0) -> bool:
    """True iff the sampled trajectory stays out of every (inflated) sphere
    and no two consecutive samples straddle a wall."""
    if dt is None:
        dt = default_dt(traj)
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = max(1, int(math.ceil((traj.t1 - traj.t0) / dt)))
    ts = np.linspace(traj.t0, traj.t1, n + 1)
    p, _, _ = sample_many(traj, ts)
    for o in task.spheres:
        if np.any(np.linalg.norm(p - o.c, axis=1) < o.rad + clearance):
            return False
    if task.walls and kernels.wall_terms(np.ascontiguousarray(p), pack_walls(task.walls))[0].max() > 0.0:
        return False
    return True
