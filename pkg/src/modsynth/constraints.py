"""Reachability, collision, base, link-order and torque constraints.

Sign conventions: ``h_*`` are equality residuals (0 when satisfied),
``g_*`` are inequality margins (>= 0 when satisfied).  Minima over an
empty set are ``math.inf`` in numbers and ``"unconstrained"`` in JSON.
"""
import math
from dataclasses import dataclass

import numpy as np

from modsynth import kernels
from modsynth.geom import Segment3, pack_spheres, pack_walls, seg_wall_distance
from modsynth.kinodyn import body_table, waypoint_dynamics
from modsynth.model import GRAVITY, BaseRegion, Design, ManipulatorState, Task, chain
from modsynth.plan import sample_trajectory

TOL_REACH = 1e-4
UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class ConstraintConfig:
    delta: float = 0.04
    beta: float = 2.0
    r_0: float = 0.1
    r_max: float = 0.3
    tol_reach: float = TOL_REACH
    gravity: tuple = GRAVITY
    check_torque: bool = True
    # walls are thin and tested for intersection only; a positive margin
    # also counts segments passing closer than this to a wall as hits
    wall_margin: float = 0.0

    def __post_init__(self):
        if not self.wall_margin >= 0:
            raise ValueError("wall_margin must be non-negative")


def reachability(d: Design, q, p) -> float:
    pts, _, _ = chain(d, q)
    return float(np.linalg.norm(pts[-1] - np.asarray(p, dtype=float)))


def _pts(S):
    return np.ascontiguousarray(S.s if isinstance(S, ManipulatorState) else S, dtype=float)


def sphere_clearance(S, spheres, delta: float) -> float:
    if not spheres:
        return math.inf
    return float(kernels.sphere_clearances(_pts(S), pack_spheres(spheres), delta).min())


def wall_collision(S, walls, margin: float = 0.0) -> int:
    if not walls:
        return 0
    hit = int(kernels.wall_terms(_pts(S), pack_walls(walls))[0].max())
    if margin > 0 and not hit:
        hit = int(wall_clearance(S, walls, margin) < 0)
    return hit


def wall_clearance(S, walls, margin: float) -> float:
    """Smallest segment-to-wall distance minus ``margin``."""
    if not walls:
        return math.inf
    pts = _pts(S)
    return min(seg_wall_distance(Segment3(pts[j], pts[j + 1]), w)
               for w in walls for j in range(len(pts) - 1)) - margin


def self_collision_clearance(S, delta: float) -> float:
    # Every pair of segments that do not share an endpoint (index gap >= 2)
    # over the 2n actuator/link segments; adjacent pairs always touch.
    d = kernels.self_distances(_pts(S))
    if d.size == 0:
        return math.inf
    return float(d.min() - 2 * delta)


def origin_in_region(O_0, b: BaseRegion) -> bool:
    x, y, z = (float(v) for v in O_0)
    return b.x_min <= x <= b.x_max and b.y_min <= y <= b.y_max and abs(z - b.z) <= 1e-12


def link_order_ok(r, r_0: float, r_max: float) -> bool:
    seq = [r_0, *[float(v) for v in r]]
    return all(a <= b for a, b in zip(seq, seq[1:])) and seq[-1] <= r_max


def _num(x):
    return UNCONSTRAINED if math.isinf(x) else float(x)


@dataclass
class ConstraintReport:
    h_R: np.ndarray
    g_S: np.ndarray
    h_W: np.ndarray
    g_SC: np.ndarray
    g_tau: np.ndarray
    origin_ok: bool
    link_order_ok: bool
    tol_reach: float = TOL_REACH
    torque_checked: bool = True

    @property
    def feasible(self) -> bool:
        ok = (np.all(self.h_R <= self.tol_reach) and np.all(self.h_W == 0)
              and np.all(self.g_S >= 0) and np.all(self.g_SC >= 0))
        if self.torque_checked:
            ok = ok and np.all(self.g_tau >= 0)
        return bool(ok and self.origin_ok and self.link_order_ok)

    def failing(self) -> list:
        """Names of the violated constraint families."""
        out = []
        if np.any(self.h_R > self.tol_reach):
            out.append("h_R")
        if np.any(self.g_S < 0):
            out.append("g_S")
        if np.any(self.h_W != 0):
            out.append("h_W")
        if np.any(self.g_SC < 0):
            out.append("g_SC")
        if self.torque_checked and np.any(self.g_tau < 0):
            out.append("g_tau")
        if not self.origin_ok:
            out.append("origin")
        if not self.link_order_ok:
            out.append("link_order")
        return out

    def to_dict(self) -> dict:
        rows = []
        for i in range(len(self.h_R)):
            rows.append({
                "h_R": float(self.h_R[i]), "g_S": _num(self.g_S[i]), "h_W": int(self.h_W[i]),
                "g_SC": _num(self.g_SC[i]),
                "g_tau": _num(self.g_tau[i]) if self.torque_checked else None,
            })
        return {
            "feasible": self.feasible,
            "failing": self.failing(),
            "origin_ok": bool(self.origin_ok),
            "link_order_ok": bool(self.link_order_ok),
            "waypoints": rows,
        }


def evaluate_all(d: Design, controls, waypoints, task: Task, cfg: ConstraintConfig, traj=None) -> ConstraintReport:
    """Full feasibility report for one design and its per-waypoint controls.

    With ``traj`` the torques are recomputed by RNEA from the trajectory's
    EF velocity and acceleration at each waypoint time; without it the
    torques stored in ``controls`` are checked as they are.
    """
    if len(controls) != len(waypoints):
        raise ValueError(f"{len(controls)} control samples for {len(waypoints)} waypoints")
    n = len(waypoints)
    spheres = pack_spheres(task.spheres)
    walls = pack_walls(task.walls)
    body = body_table(d)
    h_R = np.empty(n)
    g_S = np.full(n, math.inf)
    h_W = np.zeros(n, dtype=int)
    g_SC = np.full(n, math.inf)
    g_tau = np.full(n, math.inf)
    for i, (c, w) in enumerate(zip(controls, waypoints)):
        q = np.asarray(c.q, dtype=float)
        if q.shape[0] != d.n_dof:
            raise ValueError(f"control {i} has {q.shape[0]} joints, design has {d.n_dof}")
        pts, _, _ = chain(d, q)
        h_R[i] = np.linalg.norm(pts[-1] - w.p)
        if spheres.shape[0]:
            g_S[i] = kernels.sphere_clearances(pts, spheres, cfg.delta).min()
        if walls.shape[0]:
            h_W[i] = int(kernels.wall_terms(pts, walls)[0].max())
            if cfg.wall_margin > 0 and not h_W[i]:
                h_W[i] = int(wall_clearance(pts, task.walls, cfg.wall_margin) < 0)
        sd = kernels.self_distances(pts)
        if sd.size:
            g_SC[i] = sd.min() - 2 * cfg.delta
        if cfg.check_torque:
            if traj is not None:
                _, v, a = sample_trajectory(traj, w.t)
                _, _, tau, _ = waypoint_dynamics(d, q, v, a, w.F, body=body, gravity=cfg.gravity)
            else:
                tau = np.asarray(c.tau, dtype=float)
            g_tau[i] = np.min(d.actuator.tau_max - np.abs(cfg.beta * tau))
    return ConstraintReport(
        h_R=h_R, g_S=g_S, h_W=h_W, g_SC=g_SC, g_tau=g_tau,
        origin_ok=origin_in_region(d.origin, task.base),
        link_order_ok=link_order_ok(d.r, cfg.r_0, cfg.r_max),
        tol_reach=cfg.tol_reach, torque_checked=cfg.check_torque,
    )
