"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 synthesis exhausted / verification failed.
The default config file may be given by the MODSYNTH_CONFIG environment variable.
"""
import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from modsynth import io
from modsynth.constraints import evaluate_all
from modsynth.errors import ConfigurationError, PlanningFailure
from modsynth.kinodyn import waypoint_dynamics
from modsynth.model import ControlSample, forward_kinematics, validate_task
from modsynth.pipeline import PipelineConfig, plan_path, replan, synthesize, synthesize_kinematic_only
from modsynth.plan import sample_trajectory
from modsynth.verify import IkConfig, _dls, load_at, verify_trajectory

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
CONFIG_ENV = "MODSYNTH_CONFIG"
ARTIFACTS = ("design.json", "controls.csv", "traj.csv", "report.json")
DEBUG_ARTIFACTS = ("path.csv",)

log = logging.getLogger("modsynth")


def _config(path, seed=None) -> PipelineConfig:
    path = path or os.environ.get(CONFIG_ENV)
    cfg = io.load_config(path) if path else PipelineConfig()
    return replace(cfg, seed=seed) if seed is not None else cfg


def _err(msg) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_INPUT


def report_to_dict(rep, cfg: PipelineConfig, constraint_report=None) -> dict:
    out = {
        "outcome": rep.outcome,
        "mode": rep.mode,
        "seed": rep.seed,
        "beta": cfg.beta,
        "tau_max": cfg.tau_max,
        "n_dof": rep.design.n_dof if rep.design is not None else None,
        "constraints": constraint_report.to_dict() if constraint_report is not None else None,
        "verification": rep.verification.to_dict() if rep.verification is not None else None,
        "waypoints": [{"p": w.p, "t": w.t, "F": w.F} for w in rep.waypoints] if rep.waypoints else None,
        "ledger": rep.ledger,
    }
    return io.jsonable(out)


def run_synth(task_path, config_path=None, out_dir=".", seed=None, kinematic_only=False) -> int:
    try:
        task = io.load_task(task_path)
        cfg = _config(config_path, seed)
    except ConfigurationError as exc:
        return _err(exc)
    problems = validate_task(task)
    if problems:
        return _err("invalid task: " + "; ".join(problems))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = (synthesize_kinematic_only if kinematic_only else synthesize)(task, cfg)
    crep = None
    if rep.solved:
        verify_seed = next(r["seed"] for r in reversed(rep.ledger) if r["stage"] == "verify")
        wq = [c.q for c in rep.waypoint_controls] if rep.waypoint_controls else None
        doc = io.design_to_dict(rep.design, seed=cfg.seed, path_seed=rep.path_seed, waypoint_q=wq,
                                verify_seed=verify_seed, mode=rep.mode, path_rerun=rep.path_rerun)
        io.save_json(io.jsonable(doc), out / "design.json")
        loads = [load_at(rep.waypoints, s.t) for s in rep.controls]
        io.write_controls(rep.controls, loads, out / "controls.csv", cfg.seed)
        io.write_trajectory(rep.trajectory, [s.t for s in rep.controls], out / "traj.csv", cfg.seed)
        io.write_path(rep.waypoints, out / "path.csv", cfg.seed)
        if rep.waypoint_controls:
            crep = evaluate_all(rep.design, rep.waypoint_controls, rep.waypoints, task,
                                cfg.constraint_config(rep.design.n_dof), traj=rep.trajectory)
    io.save_json(report_to_dict(rep, cfg, crep), out / "report.json")
    if rep.solved:
        print(f"solved with {rep.design.n_dof} DOF; artifacts in {out}")
        return EXIT_OK
    print(f"exhausted after {len(rep.ledger)} ledger entries; see {out / 'report.json'}")
    return EXIT_FAIL


def _replan(task, cfg, path_seed, rerun=0):
    if path_seed is None:
        plan = plan_path(task, cfg, 0)
        return plan.waypoints, plan.trajectory
    _, wps, traj = replan(task, cfg, path_seed, rerun)
    return wps, traj


def run_verify(design_path, task_path, config_path=None) -> int:
    try:
        design, extra = io.load_design(design_path)
        task = io.load_task(task_path)
        cfg = _config(config_path, extra.get("seed"))
    except ConfigurationError as exc:
        return _err(exc)
    problems = validate_task(task)
    if problems:
        return _err("invalid task: " + "; ".join(problems))
    try:
        wps, traj = _replan(task, cfg, extra.get("path_seed"), extra.get("path_rerun", 0))
    except PlanningFailure as exc:
        return _err(f"could not re-plan the trajectory: {exc}")
    n = design.n_dof
    wq = extra.get("waypoint_q")
    if wq is not None and len(wq) != len(wps):
        return _err(f"design has {len(wq)} waypoint configurations, re-planned path has {len(wps)} waypoints")
    if wq is None:
        q = np.zeros(n)
        wq = []
        for w in wps:
            q, _ = _dls(design, w.p, q, IkConfig())
            wq.append(q)
    torque = extra["mode"] != "kinematic_only"
    ccfg = cfg.constraint_config(n, torque)
    controls = []
    for w, q in zip(wps, wq):
        _, v, a = sample_trajectory(traj, w.t)
        qd, _, tau, _ = waypoint_dynamics(design, q, v, a, w.F, gravity=ccfg.gravity)
        controls.append(ControlSample(w.t, q, qd, tau))
    crep = evaluate_all(design, controls, wps, task, ccfg, traj=traj)
    vcfg = cfg.verify_config(n, torque, int(extra.get("verify_seed") or 0))
    ver = verify_trajectory(design, traj, wps, task, cfg.n_dagger_factor * len(wps), vcfg, q_start=wq[0])
    print(json.dumps(io.jsonable({"constraints": crep.to_dict(), "verification": ver.to_dict()}), indent=2))
    return EXIT_OK if crep.feasible and ver.passed else EXIT_FAIL


def _load_artifacts(artifact_dir):
    d = Path(artifact_dir)
    design, _ = io.load_design(d / "design.json")
    samples, loads, seed = io.read_controls(d / "controls.csv")
    if not samples:
        raise ConfigurationError(f"{d / 'controls.csv'}: no control samples")
    if len(samples[0].q) != design.n_dof:
        raise ConfigurationError("controls.csv joint count does not match design.json")
    return design, samples, loads, seed


def run_simulate(artifact_dir) -> int:
    """Replay the emitted controls: recompute torques from q and the recorded EF motion."""
    try:
        design, samples, loads, _ = _load_artifacts(artifact_dir)
        ts, _, V, A = io.read_trajectory(Path(artifact_dir) / "traj.csv")
    except ConfigurationError as exc:
        return _err(exc)
    if len(ts) != len(samples) or any(t != s.t for t, s in zip(ts, samples)):
        return _err("traj.csv sample times do not match controls.csv")
    worst = 0.0
    for s, F, v, a in zip(samples, loads, V, A):
        _, _, tau, _ = waypoint_dynamics(design, s.q, v, a, F)
        worst = max(worst, float(np.max(np.abs(tau - s.tau))))
    print(f"replayed {len(samples)} samples; max torque deviation {worst:.3e} N m")
    return EXIT_OK if worst <= 1e-12 else EXIT_FAIL


def run_plot_data(artifact_dir, out_dir=None) -> int:
    try:
        design, samples, _, seed = _load_artifacts(artifact_dir)
    except ConfigurationError as exc:
        return _err(exc)
    beta = 2.0
    rp = Path(artifact_dir) / "report.json"
    if rp.exists():
        try:
            beta = float(json.loads(rp.read_text()).get("beta", beta))
        except (ValueError, TypeError):
            return _err(f"{rp}: invalid JSON")
    out = Path(out_dir or artifact_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = design.n_dof
    tmax = design.actuator.tau_max
    with open(out / "torque_profile.csv", "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"abs_tau_{k}" for k in range(1, n + 1)]
                   + [f"abs_beta_tau_{k}" for k in range(1, n + 1)] + ["tau_max"])
        for s in samples:
            w.writerow([repr(float(s.t))] + [repr(abs(float(v))) for v in s.tau]
                       + [repr(abs(beta * float(v))) for v in s.tau] + [repr(tmax)])
    with open(out / "ef_path.csv", "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "z"])
        for s in samples:
            w.writerow([repr(float(s.t))] + [repr(float(v)) for v in forward_kinematics(design, s.q).ef])
    print(f"wrote {out / 'torque_profile.csv'} and {out / 'ef_path.csv'}")
    return EXIT_OK


def run_validate(task_path) -> int:
    try:
        task = io.load_task(task_path)
    except ConfigurationError as exc:
        return _err(exc)
    problems = validate_task(task)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_INPUT
    print(f"ok: {len(task.points)} task points, {len(task.spheres)} spheres, {len(task.walls)} walls")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modsynth", description="Modular manipulator synthesis")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize a design for a task")
    s.add_argument("task")
    s.add_argument("--config", help=f"pipeline config JSON (default: ${CONFIG_ENV})")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--kinematic-only", action="store_true", help="drop torque constraints")

    s = sub.add_parser("verify", help="re-plan and re-verify a design")
    s.add_argument("design")
    s.add_argument("task")
    s.add_argument("--config")

    s = sub.add_parser("simulate", help="replay emitted controls through inverse dynamics")
    s.add_argument("artifacts")

    s = sub.add_parser("plot-data", help="export torque and EF path tables")
    s.add_argument("artifacts")
    s.add_argument("--out")

    s = sub.add_parser("validate", help="check a task file")
    s.add_argument("task")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "synth":
        return run_synth(args.task, args.config, args.out, args.seed, args.kinematic_only)
    if args.command == "verify":
        return run_verify(args.design, args.task, args.config)
    if args.command == "simulate":
        return run_simulate(args.artifacts)
    if args.command == "plot-data":
        return run_plot_data(args.artifacts, args.out)
    return run_validate(args.task)


if __name__ == "__main__":
    sys.exit(main())
