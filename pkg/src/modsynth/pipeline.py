"""Outer synthesis loop: DOF sweep, restart policy and the attempt ledger.

Every attempt is a pure function of (task, config, n_dof, attempt index),
so the report is reproducible regardless of how attempts are scheduled.
"""
import time
from dataclasses import dataclass, field, replace

import numpy as np

from modsynth.constraints import ConstraintConfig, evaluate_all
from modsynth.errors import ConfigurationError, DegenerateLegError, PlanningFailure
from modsynth.model import ActuatorSpec, LinkSpec, Task, validate_task
from modsynth.opt import (Layout, OptConfig, SolverConfig, controls_from_x, feasibility_probe,
                          full_optimize, kinematic_optimize, random_x0)
from modsynth.plan import (PlannerConfig, Waypoint, assign_times_loads, check_trajectory_collision,
                           fit_trajectory, rrt_star)
from modsynth.verify import IkConfig, VerifyConfig, verify_trajectory

SOLVED = "solved"
EXHAUSTED = "exhausted"
DEFAULT_R_MAX = {2: 0.6, 3: 0.4, 4: 0.3}
MAX_SPAN = 1.2


def default_r_max(n_dof: int) -> float:
    return DEFAULT_R_MAX.get(n_dof, MAX_SPAN / n_dof)


@dataclass(frozen=True)
class PipelineConfig:
    dof_min: int = 2
    dof_max: int = 6
    max_rrt_attempts: int = 5
    max_kin_restarts: int = 4
    max_full_restarts: int = 2
    max_rrt_reruns: int = 5
    seed: int = 0
    r_0: float = 0.1
    r_max: object = None  # None -> per-DOF default table; float; or {n_dof: value}
    delta: float = 0.04
    wall_margin: float = 0.0
    beta: float = 2.0
    tau_max: float = 8.0
    tol_reach: float = 1e-4
    n_dagger_factor: int = 10
    time_budget_s: float = 600.0
    planner: PlannerConfig = PlannerConfig()
    solver: SolverConfig = SolverConfig()
    ik: IkConfig = IkConfig()
    actuator: ActuatorSpec = ActuatorSpec()
    link: LinkSpec = LinkSpec()
    clearance_cap: float = 0.2
    repair_starts: int = 16
    continuity_rel_slack: float = 0.02
    continuity_abs_slack: float = 1e-6

    def __post_init__(self):
        if not 1 <= self.dof_min <= self.dof_max:
            raise ConfigurationError("dof range must satisfy 1 <= min <= max")
        for name in ("max_rrt_attempts", "max_kin_restarts", "max_full_restarts", "n_dagger_factor"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive count")
        if not self.beta > 1:
            raise ConfigurationError("safety factor beta must exceed 1")
        if not 0 < self.r_0:
            raise ConfigurationError("r_0 must be positive")
        if not self.wall_margin >= 0:
            raise ConfigurationError("wall_margin must be non-negative")

    def r_max_for(self, n_dof: int) -> float:
        if self.r_max is None:
            return default_r_max(n_dof)
        if isinstance(self.r_max, dict):
            return float(self.r_max.get(n_dof, self.r_max.get(str(n_dof), default_r_max(n_dof))))
        return float(self.r_max)

    def attempts_per_tier(self) -> int:
        return self.max_rrt_attempts * self.max_kin_restarts

    def constraint_config(self, n_dof: int, torque: bool = True) -> ConstraintConfig:
        return ConstraintConfig(delta=self.delta, beta=self.beta, r_0=self.r_0, r_max=self.r_max_for(n_dof),
                                tol_reach=self.tol_reach, check_torque=torque, wall_margin=self.wall_margin)

    def opt_config(self, n_dof: int, torque: bool = True) -> OptConfig:
        return OptConfig(constraints=self.constraint_config(n_dof, torque), solver=self.solver,
                         actuator=replace(self.actuator, tau_max=self.tau_max), link=self.link,
                         clearance_cap=self.clearance_cap, repair_starts=self.repair_starts)

    def verify_config(self, n_dof: int, torque: bool = True, seed: int = 0) -> VerifyConfig:
        return VerifyConfig(ik=self.ik, constraints=self.constraint_config(n_dof, torque),
                            rel_slack=self.continuity_rel_slack, abs_slack=self.continuity_abs_slack, seed=seed)


@dataclass
class PathPlan:
    path: list
    waypoints: list
    trajectory: object
    seed: int
    reruns: int


@dataclass
class AttemptOutcome:
    verified: bool
    records: list
    design: object = None
    x: np.ndarray = None
    waypoints: list = None
    waypoint_controls: list = None
    trajectory: object = None
    verification: object = None
    path_seed: int = None
    path_rerun: int = 0
    kinematic_design: bool = False


@dataclass
class SynthesisReport:
    outcome: str
    design: object = None
    controls: list = None
    trajectory: object = None
    ledger: list = field(default_factory=list)
    waypoints: list = None
    waypoint_controls: list = None
    verification: object = None
    path_seed: int = None
    seed: int = 0
    mode: str = "full"
    path_rerun: int = 0

    @property
    def solved(self) -> bool:
        return self.outcome == SOLVED


def _path_seed(cfg: PipelineConfig, path_idx: int, rerun: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, path_idx, rerun]).generate_state(1)[0])


def replan(task: Task, cfg: PipelineConfig, seed: int, rerun: int = 0):
    """(path, waypoints, trajectory) for one planner seed.

    A rerun must be able to return a different path, so it grows trees even
    where the straight leg is free.
    """
    planner = replace(cfg.planner, rng_seed=int(seed), shortcut=cfg.planner.shortcut and rerun == 0)
    path = rrt_star(task, planner)
    wps = assign_times_loads(task, path)
    return path, wps, fit_trajectory(wps)


def plan_path(task: Task, cfg: PipelineConfig, path_idx: int, ledger=None) -> PathPlan:
    """RRT* path, times/loads and spline; RRT* is rerun while the spline collides."""
    last_err = None
    for rerun in range(cfg.max_rrt_reruns + 1):
        seed = _path_seed(cfg, path_idx, rerun)
        t0 = time.perf_counter()
        try:
            path, wps, traj = replan(task, cfg, seed, rerun)
        except (PlanningFailure, DegenerateLegError) as exc:
            last_err = exc
            _log(ledger, stage="rrt", path_index=path_idx, seed=seed, result="failed",
                 detail=str(exc), wall_time=time.perf_counter() - t0)
            continue
        if check_trajectory_collision(traj, task):
            _log(ledger, stage="rrt", path_index=path_idx, seed=seed, result="ok",
                 detail=f"{len(wps)} waypoints", wall_time=time.perf_counter() - t0)
            return PathPlan(path, wps, traj, seed, rerun)
        _log(ledger, stage="rrt_rerun", path_index=path_idx, seed=seed, result="trajectory_collision",
             detail="fitted trajectory collides; rerunning RRT*", wall_time=time.perf_counter() - t0)
    raise PlanningFailure(-1) from last_err


def _log(ledger, **rec):
    if ledger is not None:
        ledger.append(rec)


def _task_waypoints(task: Task):
    return [Waypoint(tp.p.copy(), tp.t, tp.F.copy()) for tp in task.points]


def run_attempt(task: Task, cfg: PipelineConfig, n_dof: int, index: int, plan: PathPlan = None,
                kinematic_only: bool = False) -> AttemptOutcome:
    """One restart: kinematic stage, probe, full stage, verification.

    In kinematic-only mode the kinematic stage is solved on the task points
    alone (the baseline's "kinematic design"), after which the fixed design
    must follow the planned trajectory without torque checks.
    """
    torque = not kinematic_only
    ocfg = cfg.opt_config(n_dof, torque)
    records = []
    base = dict(n_dof=n_dof, attempt=index)
    path_idx = index // cfg.max_kin_restarts
    if plan is None:
        try:
            plan = plan_path(task, cfg, path_idx, records)
        except PlanningFailure as exc:
            records.append(dict(base, stage="rrt", path_index=path_idx, seed=None, result="failed",
                                detail=str(exc), wall_time=0.0))
            return AttemptOutcome(False, records)
    for r in records:
        r.update(base)
    seed = int(np.random.SeedSequence([cfg.seed, n_dof, index]).generate_state(1)[0])
    rng = np.random.default_rng(seed)
    wps = _task_waypoints(task) if kinematic_only else plan.waypoints
    L = Layout(n_dof, len(wps))
    c = ocfg.constraints
    x0 = random_x0(rng, L, task, c.r_0, c.r_max)
    x0 = _warm_start(task, wps, L, x0, ocfg, rng)

    t0 = time.perf_counter()
    kin = kinematic_optimize(task, wps, n_dof, x0, ocfg, rng=rng)
    design = L.design(kin.x, task, ocfg.actuator, ocfg.link)
    kcfg = replace(c, check_torque=False)
    krep = evaluate_all(design, controls_from_x(L, kin.x, wps, design), wps, task, kcfg)
    records.append(dict(base, stage="kinematic", seed=seed, result="feasible" if krep.feasible else "infeasible",
                        detail=_residual_detail(kin, krep), wall_time=time.perf_counter() - t0))
    out = AttemptOutcome(False, records, path_seed=plan.seed, path_rerun=plan.reruns,
                         kinematic_design=krep.feasible)

    if kinematic_only:
        if not krep.feasible:
            return out
        x_final = kin.x
        # trajectory search for the fixed design; seed from the first task point
        wps_v = plan.waypoints
        q_first = x_final[L.theta_index(0, 0):L.theta_index(0, 0) + n_dof]
    else:
        t0 = time.perf_counter()
        if krep.feasible and feasibility_probe(kin, task, wps, n_dof, ocfg, plan.trajectory):
            records.append(dict(base, stage="probe", seed=seed, result="feasible", detail="full stage skipped",
                                wall_time=time.perf_counter() - t0))
            x_final = kin.x
        else:
            records.append(dict(base, stage="probe", seed=seed, result="infeasible", detail="",
                                wall_time=time.perf_counter() - t0))
            x_final = None
            x_start = kin.x
            for k in range(cfg.max_full_restarts):
                t0 = time.perf_counter()
                full = full_optimize(task, wps, n_dof, x_start, ocfg, plan.trajectory)
                d_full = L.design(full.x, task, ocfg.actuator, ocfg.link)
                rep = evaluate_all(d_full, controls_from_x(L, full.x, wps, d_full), wps, task, c,
                                   traj=plan.trajectory)
                records.append(dict(base, stage="full", seed=seed, result="feasible" if rep.feasible else "infeasible",
                                    detail=_residual_detail(full, rep), wall_time=time.perf_counter() - t0))
                if rep.feasible:
                    x_final = full.x
                    break
                x_start = full.x
            if x_final is None:
                return out
        wps_v = wps
        q_first = x_final[L.theta_index(0, 0):L.theta_index(0, 0) + n_dof]

    design = L.design(x_final, task, ocfg.actuator, ocfg.link)
    n_dagger = cfg.n_dagger_factor * len(wps_v)
    t0 = time.perf_counter()
    ver = verify_trajectory(design, plan.trajectory, wps_v, task, n_dagger,
                            cfg.verify_config(n_dof, torque, seed), q_start=q_first)
    fail = "" if ver.passed else f"{ver.first_failure[1]} at sample {ver.first_failure[0]}"
    if ver.details.get("seed_branch_collided"):
        fail += " (continuous branch collided)"
    records.append(dict(base, stage="verify", seed=seed, result="passed" if ver.passed else "failed",
                        detail=fail, wall_time=time.perf_counter() - t0))
    out.verified = ver.passed
    out.design = design
    out.x = x_final
    out.waypoints = wps_v
    out.trajectory = plan.trajectory
    out.verification = ver
    if not kinematic_only:
        out.waypoint_controls = controls_from_x(L, x_final, wps_v, design, plan.trajectory, c.gravity)
    return out


def _warm_start(task, wps, L, x0, ocfg, rng):
    """Chain IK from the random design: each waypoint's angles are seeded by
    the previous waypoint's solution, giving a consistent branch."""
    from modsynth.verify import IkConfig, _dls

    design = L.design(x0, task, ocfg.actuator, ocfg.link)
    x = x0.copy()
    n = L.n_dof
    cfg = IkConfig(max_iters=100, restarts=0)
    q = x[L.theta_index(0, 0):L.theta_index(0, 0) + n].copy()
    for i, w in enumerate(wps):
        q, _ = _dls(design, w.p, q, cfg)
        x[L.theta_index(i, 0):L.theta_index(i, 0) + n] = q
    return x


def _residual_detail(res, rep) -> str:
    fails = ",".join(rep.failing()) or "none"
    return f"max_h_R={float(np.max(rep.h_R)):.3e} failing={fails} iters={res.iterations}"


def _report_from(out: AttemptOutcome, ledger, cfg, mode) -> SynthesisReport:
    return SynthesisReport(SOLVED, out.design, out.verification.samples, out.trajectory, ledger,
                           out.waypoints, out.waypoint_controls, out.verification, out.path_seed, cfg.seed, mode,
                           out.path_rerun)


def _sweep(task: Task, cfg: PipelineConfig, kinematic_only: bool) -> SynthesisReport:
    problems = validate_task(task)
    if problems:
        raise ConfigurationError("; ".join(problems))
    mode = "kinematic_only" if kinematic_only else "full"
    ledger = []
    plans = {}
    for n_dof in range(cfg.dof_min, cfg.dof_max + 1):
        start = time.perf_counter()
        for a in range(cfg.attempts_per_tier()):
            if time.perf_counter() - start > cfg.time_budget_s:
                ledger.append(dict(n_dof=n_dof, attempt=a, stage="budget", seed=None, result="time_exhausted",
                                   detail=f"{cfg.time_budget_s} s tier budget", wall_time=0.0))
                break
            path_idx = a // cfg.max_kin_restarts
            if path_idx not in plans:
                recs = []
                try:
                    plans[path_idx] = plan_path(task, cfg, path_idx, recs)
                except PlanningFailure:
                    plans[path_idx] = None
                for r in recs:
                    ledger.append(dict(r, n_dof=n_dof, attempt=a))
            plan = plans[path_idx]
            if plan is None:
                ledger.append(dict(n_dof=n_dof, attempt=a, stage="rrt", seed=None, result="failed",
                                   detail="no collision-free trajectory", wall_time=0.0))
                continue
            out = run_attempt(task, cfg, n_dof, a, plan, kinematic_only)
            ledger.extend(out.records)
            if out.verified:
                return _report_from(out, ledger, cfg, mode)
    return SynthesisReport(EXHAUSTED, ledger=ledger, seed=cfg.seed, mode=mode)


def synthesize(task: Task, cfg: PipelineConfig = PipelineConfig()) -> SynthesisReport:
    return _sweep(task, cfg, kinematic_only=False)


def synthesize_kinematic_only(task: Task, cfg: PipelineConfig = PipelineConfig()) -> SynthesisReport:
    return _sweep(task, cfg, kinematic_only=True)


def ledger_equal(a, b) -> bool:
    """Ledger comparison ignoring wall-clock times."""
    strip = [{k: v for k, v in r.items() if k != "wall_time"} for r in a]
    return strip == [{k: v for k, v in r.items() if k != "wall_time"} for r in b]
