"""File formats: task/config JSON in, design/controls/trajectory/report out.

All numbers are SI.  Floats are written with ``repr`` so files round-trip
exactly and identical runs produce identical bytes.  Every artifact carries
the RNG seed it was produced with.  See docs/formats.md.
"""
import csv
import dataclasses
import json
import math

import numpy as np

from modsynth.errors import ConfigurationError
from modsynth.geom import SphereObstacle, WallObstacle
from modsynth.model import ActuatorSpec, BaseRegion, ControlSample, Design, LinkSpec, Task, TaskPoint
from modsynth.plan import PiecewiseTrajectory

UNCONSTRAINED = "unconstrained"


class FormatError(ConfigurationError):
    """Malformed input file; the message names the offending field."""


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if v == UNCONSTRAINED:
            return math.inf
        raise FormatError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _vec(v, n, where):
    if not isinstance(v, list) or len(v) != n:
        raise FormatError(f"{where}: expected a list of {n} numbers")
    return np.array([_num(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from exc


def _obj(v, where, required=(), optional=()):
    if not isinstance(v, dict):
        raise FormatError(f"{where}: expected an object")
    for k in required:
        if k not in v:
            raise FormatError(f"{where}: missing field '{k}'")
    unknown = set(v) - set(required) - set(optional)
    if unknown:
        raise FormatError(f"{where}: unknown field '{sorted(unknown)[0]}'")
    return v


# ---------------------------------------------------------------- task

def task_from_dict(doc) -> Task:
    _obj(doc, "task", ("points",), ("spheres", "walls", "base"))
    if not isinstance(doc["points"], list) or not doc["points"]:
        raise FormatError("points: expected a non-empty list")
    pts = []
    for i, p in enumerate(doc["points"]):
        w = f"points[{i}]"
        _obj(p, w, ("p", "t"), ("F",))
        F = _vec(p["F"], 6, w + ".F") if "F" in p else np.zeros(6)
        pts.append(TaskPoint(_vec(p["p"], 3, w + ".p"), _num(p["t"], w + ".t"), F))
    spheres = []
    for i, s in enumerate(doc.get("spheres", [])):
        w = f"spheres[{i}]"
        _obj(s, w, ("c", "rad"))
        try:
            spheres.append(SphereObstacle(_vec(s["c"], 3, w + ".c"), _num(s["rad"], w + ".rad")))
        except ConfigurationError as exc:
            raise FormatError(f"{w}: {exc}") from exc
    walls = []
    for i, s in enumerate(doc.get("walls", [])):
        w = f"walls[{i}]"
        _obj(s, w, ("corners",))
        if not isinstance(s["corners"], list) or len(s["corners"]) != 4:
            raise FormatError(f"{w}.corners: expected 4 corners")
        corners = np.array([_vec(c, 3, f"{w}.corners[{j}]") for j, c in enumerate(s["corners"])])
        try:
            walls.append(WallObstacle(corners))
        except ConfigurationError as exc:
            raise FormatError(f"{w}: {exc}") from exc
    b = doc.get("base", {"x_min": 0.0, "x_max": 0.0, "y_min": 0.0, "y_max": 0.0, "z": 0.0})
    _obj(b, "base", ("x_min", "x_max", "y_min", "y_max", "z"))
    base = BaseRegion(*(_num(b[k], f"base.{k}") for k in ("x_min", "x_max", "y_min", "y_max", "z")))
    return Task(pts, spheres, walls, base)


def task_to_dict(task: Task) -> dict:
    return {
        "points": [{"p": tp.p.tolist(), "t": tp.t, "F": tp.F.tolist()} for tp in task.points],
        "spheres": [{"c": o.c.tolist(), "rad": o.rad} for o in task.spheres],
        "walls": [{"corners": np.asarray(w.corners).tolist()} for w in task.walls],
        "base": dataclasses.asdict(task.base),
    }


def load_task(path) -> Task:
    return task_from_dict(_load_json(path))


def save_task(task: Task, path):
    with open(path, "w") as fh:
        json.dump(task_to_dict(task), fh, indent=2)


# ---------------------------------------------------------------- config

def _dc_from(cls, doc, where):
    names = {f.name for f in dataclasses.fields(cls)}
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: expected an object")
    bad = set(doc) - names
    if bad:
        raise FormatError(f"{where}: unknown field '{sorted(bad)[0]}'")
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    kw = {}
    for k, v in doc.items():
        if types[k] in (float, "float", int, "int"):
            v = _num(v, f"{where}.{k}")
            if types[k] in (int, "int"):
                if v != int(v):
                    raise FormatError(f"{where}.{k}: expected an integer")
                v = int(v)
        kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def config_from_dict(doc):
    from modsynth.opt import SolverConfig
    from modsynth.pipeline import PipelineConfig
    from modsynth.plan import PlannerConfig
    from modsynth.verify import IkConfig

    if not isinstance(doc, dict):
        raise FormatError("config: expected an object")
    nested = {"planner": PlannerConfig, "solver": SolverConfig, "ik": IkConfig,
              "actuator": ActuatorSpec, "link": LinkSpec}
    kw = {}
    names = {f.name for f in dataclasses.fields(PipelineConfig)}
    for k, v in doc.items():
        if k not in names:
            raise FormatError(f"config: unknown field '{k}'")
        if k in nested:
            kw[k] = _dc_from(nested[k], v, k)
        elif k == "r_max":
            if isinstance(v, dict):
                kw[k] = {int(n): _num(x, f"r_max.{n}") for n, x in v.items()}
            elif v is not None:
                kw[k] = _num(v, "r_max")
        elif isinstance(v, bool):
            raise FormatError(f"config.{k}: expected a number")
        else:
            kw[k] = _num(v, f"config.{k}")
    for k in ("dof_min", "dof_max", "max_rrt_attempts", "max_kin_restarts", "max_full_restarts",
              "max_rrt_reruns", "seed", "n_dagger_factor", "repair_starts"):
        if k in kw:
            if kw[k] != int(kw[k]):
                raise FormatError(f"config.{k}: expected an integer")
            kw[k] = int(kw[k])
    try:
        return PipelineConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"config: {exc}") from exc


def load_config(path):
    return config_from_dict(_load_json(path))


# ---------------------------------------------------------------- design

def _enc(v):
    return UNCONSTRAINED if isinstance(v, float) and math.isinf(v) else v


def design_to_dict(d: Design, seed=None, path_seed=None, waypoint_q=None, verify_seed=None,
                   mode="full", path_rerun=0) -> dict:
    return {
        "seed": seed,
        "path_seed": path_seed,
        "path_rerun": path_rerun,
        "verify_seed": verify_seed,
        "mode": mode,
        "n_dof": d.n_dof,
        "origin": d.origin.tolist(),
        "alpha": list(d.alpha),
        "r": list(d.r),
        "actuator": {k: _enc(v) for k, v in dataclasses.asdict(d.actuator).items()},
        "link": dataclasses.asdict(d.link),
        "waypoint_q": None if waypoint_q is None else [np.asarray(q).tolist() for q in waypoint_q],
    }


def design_from_dict(doc):
    """Returns (design, extras); extras holds the seeds, mode and waypoint_q."""
    _obj(doc, "design", ("n_dof", "origin", "alpha", "r"),
         ("seed", "path_seed", "path_rerun", "verify_seed", "mode", "actuator", "link", "waypoint_q"))
    n = doc["n_dof"]
    if not isinstance(n, int) or n < 1:
        raise FormatError("design.n_dof: expected a positive integer")
    act = _dc_from(ActuatorSpec, doc.get("actuator", {}), "actuator")
    link = _dc_from(LinkSpec, doc.get("link", {}), "link")
    d = Design(_vec(doc["origin"], 3, "origin"), _vec(doc["alpha"], n, "alpha"), _vec(doc["r"], n, "r"), act, link)
    wq = doc.get("waypoint_q")
    if wq is not None:
        wq = [_vec(q, n, f"waypoint_q[{i}]") for i, q in enumerate(wq)]
    extras = {k: doc.get(k) for k in ("seed", "path_seed", "verify_seed")}
    extras["path_rerun"] = doc.get("path_rerun") or 0
    extras["mode"] = doc.get("mode", "full")
    extras["waypoint_q"] = wq
    return d, extras


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_design(path):
    return design_from_dict(_load_json(path))


# ---------------------------------------------------------------- CSV artifacts

def _r(x) -> str:
    return repr(float(x))


def _header_seed(fh, seed):
    fh.write(f"# seed={seed}\n")


def write_controls(samples, loads, path, seed):
    """One row per sample: t, q_k, q_dot_k, tau_k, then the applied wrench."""
    n = len(samples[0].q) if samples else 0
    with open(path, "w", newline="") as fh:
        _header_seed(fh, seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"q_{k}" for k in range(1, n + 1)] + [f"qd_{k}" for k in range(1, n + 1)]
                   + [f"tau_{k}" for k in range(1, n + 1)] + ["Fx", "Fy", "Fz", "Mx", "My", "Mz"])
        for s, F in zip(samples, loads):
            w.writerow([_r(s.t)] + [_r(v) for v in s.q] + [_r(v) for v in s.q_dot]
                       + [_r(v) for v in s.tau] + [_r(v) for v in F])


def _read_csv(path):
    seed = None
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from exc
    body = []
    for ln in lines:
        if ln.startswith("#"):
            if ln.startswith("# seed="):
                seed = ln.split("=", 1)[1]
            continue
        body.append(ln)
    rows = list(csv.reader(body))
    if not rows:
        raise FormatError(f"{path}: missing header row")
    return seed, rows[0], rows[1:]


def read_controls(path):
    """Returns (samples, loads, seed)."""
    seed, header, rows = _read_csv(path)
    n = sum(1 for h in header if h.startswith("q_"))
    if n == 0 or len(header) != 1 + 3 * n + 6:
        raise FormatError(f"{path}: unexpected columns {header}")
    samples, loads = [], []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise FormatError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        try:
            v = np.array([float(x) for x in row])
        except ValueError as exc:
            raise FormatError(f"{path}: row {i + 1}: {exc}") from exc
        samples.append(ControlSample(v[0], v[1:1 + n], v[1 + n:1 + 2 * n], v[1 + 2 * n:1 + 3 * n]))
        loads.append(v[1 + 3 * n:])
    return samples, loads, seed


TRAJ_COLUMNS = ["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"]


def write_trajectory(traj: PiecewiseTrajectory, ts, path, seed):
    """Spline samples (position, velocity, acceleration) at the given times."""
    from modsynth.plan import sample_trajectory

    with open(path, "w", newline="") as fh:
        _header_seed(fh, seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_COLUMNS)
        for t in ts:
            p, v, a = sample_trajectory(traj, float(t))
            w.writerow([_r(t)] + [_r(x) for x in (*p, *v, *a)])


def read_trajectory(path):
    """Returns (t, p, v, a) arrays from a traj.csv sample dump."""
    _, header, rows = _read_csv(path)
    if header != TRAJ_COLUMNS:
        raise FormatError(f"{path}: unexpected columns {header}")
    if not rows:
        raise FormatError(f"{path}: no samples")
    try:
        arr = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if arr.shape[1] != len(TRAJ_COLUMNS):
        raise FormatError(f"{path}: rows must have {len(TRAJ_COLUMNS)} fields")
    return arr[:, 0], arr[:, 1:4], arr[:, 4:7], arr[:, 7:10]


def write_path(waypoints, path, seed):
    """The timed RRT* waypoints the spline interpolates."""
    with open(path, "w", newline="") as fh:
        _header_seed(fh, seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "z"])
        for wp in waypoints:
            w.writerow([_r(wp.t)] + [_r(v) for v in wp.p])


def jsonable(v):
    """Recursively convert numpy values and infinities for JSON output."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return UNCONSTRAINED if math.isinf(v) else (None if math.isnan(v) else v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v
