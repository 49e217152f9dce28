"""Collision-aware inverse kinematics and trajectory-following verification."""
import math
from dataclasses import dataclass, field

import numpy as np

from modsynth import kernels
from modsynth.constraints import ConstraintConfig, wall_clearance
from modsynth.geom import pack_spheres, pack_walls
from modsynth.kinodyn import body_table, waypoint_dynamics
from modsynth.model import ControlSample, Design, Task, chain

IK_FAILED = "ik_failed"
COLLISION = "collision"
TORQUE = "torque"
CONTINUITY = "continuity"
SEED_BRANCH_COLLIDED = "ok_after_collision"


@dataclass(frozen=True)
class IkConfig:
    max_iters: int = 200
    pos_tol: float = 1e-4
    damping: float = 0.01
    restarts: int = 16
    polish_tol: float = 1e-12
    restart_spread: float = 1.0

    def __post_init__(self):
        if self.max_iters <= 0 or self.pos_tol <= 0 or self.damping <= 0 or self.restarts < 0:
            raise ValueError("IK settings must be positive")


def configuration_collision_free(d: Design, q, task: Task, ccfg: ConstraintConfig) -> bool:
    pts, _, _ = chain(d, q)
    return _pts_free(pts, pack_spheres(task.spheres), pack_walls(task.walls), ccfg.delta,
                     task.walls, ccfg.wall_margin)


def _pts_free(pts, spheres, walls, delta, wall_list=(), margin=0.0) -> bool:
    if spheres.shape[0] and kernels.sphere_clearances(pts, spheres, delta).min() < 0:
        return False
    if walls.shape[0] and kernels.wall_terms(pts, walls)[0].max() > 0:
        return False
    if margin > 0 and wall_clearance(pts, wall_list, margin) < 0:
        return False
    sd = kernels.self_distances(pts)
    return not (sd.size and sd.min() - 2 * delta < 0)


def _dls(d: Design, target, q, cfg: IkConfig):
    """Damped least squares from q; returns (q, residual)."""
    lam2 = cfg.damping ** 2
    q = np.array(q, dtype=float)
    best_q, best_err = q.copy(), math.inf
    for _ in range(cfg.max_iters + 1):
        pts, zs, _ = chain(d, q)
        e = target - pts[-1]
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_q, best_err = q.copy(), err
        if err <= cfg.polish_tol:
            break
        J = kernels.jacobian(pts, zs)
        step = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), e)
        if err <= cfg.pos_tol:
            # polishing: undamped minimum-norm step, accepted only if it helps
            trial = q + np.linalg.lstsq(J, e, rcond=None)[0]
            et = float(np.linalg.norm(target - chain(d, trial)[0][-1]))
            if et < err:
                q = trial
                continue
            if float(np.linalg.norm(step)) < 1e-15:
                break
        q = q + step
    return best_q, best_err


def solve_ik(d: Design, target, q_seed, task: Task, cfg: IkConfig = IkConfig(),
             ccfg: ConstraintConfig = ConstraintConfig(), rng=None):
    """Returns (q or None, status).

    Status is 'ok', SEED_BRANCH_COLLIDED (solved, but only after a colliding
    solution was rejected), ik_failed or collision.
    """
    target = np.asarray(target, dtype=float)
    q_seed = np.asarray(q_seed, dtype=float)
    spheres, walls = pack_spheres(task.spheres), pack_walls(task.walls)

    def accept(q):
        return _pts_free(chain(d, q)[0], spheres, walls, ccfg.delta, task.walls, ccfg.wall_margin)

    if np.linalg.norm(chain(d, q_seed)[0][-1] - target) <= cfg.pos_tol * 1e-3 and accept(q_seed):
        return q_seed.copy(), "ok"
    reached = False
    rng = np.random.default_rng(0) if rng is None else rng
    near = cfg.restarts // 2
    for k in range(cfg.restarts + 1):
        if k == 0:
            start = q_seed
        elif k <= near:
            # growing perturbations stay on the seed's branch where possible
            start = q_seed + rng.normal(0.0, cfg.restart_spread, q_seed.shape) * (k / near)
        else:
            # uniform starts reach the other branches
            start = rng.uniform(-math.pi, math.pi, q_seed.shape)
        q, err = _dls(d, target, start, cfg)
        if err <= cfg.pos_tol:
            if accept(q):
                return q, (SEED_BRANCH_COLLIDED if reached else "ok")
            reached = True
    return None, (COLLISION if reached else IK_FAILED)


def inverse_kinematics(d: Design, target, q_seed, task: Task, cfg: IkConfig = IkConfig(),
                       ccfg: ConstraintConfig = ConstraintConfig(), rng=None):
    """Collision-free configuration placing the EF within pos_tol of target, or None."""
    return solve_ik(d, target, q_seed, task, cfg, ccfg, rng)[0]


@dataclass(frozen=True)
class VerifyConfig:
    ik: IkConfig = IkConfig()
    constraints: ConstraintConfig = ConstraintConfig()
    # slack on the continuity bound; see continuity_bound
    curvature_term: bool = True
    rel_slack: float = 0.02
    abs_slack: float = 1e-6
    seed: int = 0


@dataclass
class VerificationResult:
    passed: bool
    samples: list
    first_failure: tuple = None
    dt: float = 0.0
    max_step_ratio: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_samples": len(self.samples),
            "first_failure": None if self.first_failure is None else
            {"index": int(self.first_failure[0]), "reason": self.first_failure[1]},
            "dt": self.dt,
            "max_step_ratio": self.max_step_ratio,
            "details": dict(self.details),
        }


def continuity_bound(qd_a, qd_b, dt, qdd_a=None, qdd_b=None, rel_slack=0.0, abs_slack=0.0):
    """Per-joint bound max(|qd_a|, |qd_b|) * dt, with an optional curvature term.

    The plain bound is first order: when a joint velocity peaks between the
    two samples the true step exceeds it by about |q_ddd| dt^3 / 24.  Adding
    0.5 * max(|qdd_a|, |qdd_b|) * dt^2 covers that excess.
    """
    v = np.maximum(np.abs(qd_a), np.abs(qd_b))
    if qdd_a is not None and qdd_b is not None:
        v = v + 0.5 * np.maximum(np.abs(qdd_a), np.abs(qdd_b)) * dt
    return v * dt * (1.0 + rel_slack) + abs_slack


def load_at(waypoints, t):
    """Step-function load: the load of the last waypoint at or before t."""
    F = waypoints[0].F
    for w in waypoints:
        if w.t <= t:
            F = w.F
        else:
            break
    return np.asarray(F, dtype=float)


def verify_trajectory(d: Design, traj, waypoints, task: Task, n_dagger: int,
                      cfg: VerifyConfig = VerifyConfig(), q_start=None) -> VerificationResult:
    """Follow ``traj`` at n_dagger uniform samples with IK, checking torque and continuity.

    ``q_start`` seeds the first IK solve (the optimizer's first-waypoint
    configuration); later samples are seeded by a second-order prediction
    from the previous sample.
    """
    from modsynth.plan import sample_trajectory

    if n_dagger <= len(waypoints):
        raise ValueError("n_dagger must exceed the number of waypoints")
    ccfg = cfg.constraints
    ts = np.linspace(traj.t0, traj.t1, n_dagger)
    dt = float(ts[1] - ts[0])
    body = body_table(d)
    rng = np.random.default_rng(cfg.seed)
    q_seed = np.zeros(d.n_dof) if q_start is None else np.asarray(q_start, dtype=float)
    samples = []
    prev = None
    worst = 0.0
    tmax = d.actuator.tau_max
    for i, t in enumerate(ts):
        p, v, a = sample_trajectory(traj, float(t))
        if prev is not None:
            q_seed = prev[0] + prev[1] * dt + 0.5 * prev[2] * dt * dt
        q, status = solve_ik(d, p, q_seed, task, cfg.ik, ccfg, rng)
        if q is None:
            return VerificationResult(False, samples, (i, status), dt, worst)
        qd, qdd, tau, _ = waypoint_dynamics(d, q, v, a, load_at(waypoints, t), body=body, gravity=ccfg.gravity)
        samples.append(ControlSample(float(t), q, qd, tau))
        if ccfg.check_torque and np.min(tmax - np.abs(ccfg.beta * tau)) < 0:
            return VerificationResult(False, samples, (i, TORQUE), dt, worst)
        if prev is not None:
            curv = (prev[2], qdd) if cfg.curvature_term else (None, None)
            eps = continuity_bound(prev[1], qd, dt, *curv, cfg.rel_slack, cfg.abs_slack)
            step = np.abs(q - prev[0])
            worst = max(worst, float(np.max(step / eps)))
            if np.any(step > eps):
                # note when the jump was forced by the continuous branch colliding
                details = {"seed_branch_collided": status == SEED_BRANCH_COLLIDED}
                return VerificationResult(False, samples, (i, CONTINUITY), dt, worst, details)
        prev = (q, qd, qdd)
    return VerificationResult(True, samples, None, dt, worst)
