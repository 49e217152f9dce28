"""Task, structure and control data model, plus DH forward kinematics."""
import math
from dataclasses import dataclass, field

import numpy as np

from modsynth import kernels
from modsynth.geom import Segment3, SphereObstacle, WallObstacle, point3

GRAVITY = (0.0, 0.0, -9.81)


@dataclass(frozen=True)
class TaskPoint:
    p: np.ndarray
    t: float
    F: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "p", point3(self.p))
        F = np.asarray(self.F, dtype=float).reshape(6)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class BaseRegion:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z: float

    @classmethod
    def fixed(cls, x, y, z):
        return cls(x, x, y, y, z)

    @property
    def center(self):
        return np.array([(self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2, self.z])


@dataclass(frozen=True)
class Task:
    points: tuple
    spheres: tuple = ()
    walls: tuple = ()
    base: BaseRegion = BaseRegion(0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "spheres", tuple(self.spheres))
        object.__setattr__(self, "walls", tuple(self.walls))

    @property
    def duration(self) -> float:
        return self.points[-1].t - self.points[0].t


@dataclass(frozen=True)
class ActuatorSpec:
    """One revolute module actuator, modelled as a solid cylinder on the joint axis."""

    mass: float = 0.34
    body_radius: float = 0.037
    body_height: float = 0.1
    d: float = 0.1
    tau_max: float = 8.0
    omega_max: float = math.inf

    def __post_init__(self):
        for name in ("mass", "body_radius", "body_height", "d", "omega_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"actuator {name} must be positive")
        if not self.tau_max >= 0:
            raise ValueError("actuator tau_max must be non-negative")


@dataclass(frozen=True)
class LinkSpec:
    """Hollow tube link; ``delta`` is the collision diameter of every component."""

    density: float = 2700.0
    rad_outer: float = 0.015875
    rad_inner: float = 0.014275
    delta: float = 0.04

    def __post_init__(self):
        if not 0 <= self.rad_inner < self.rad_outer:
            raise ValueError("link radii must satisfy 0 <= inner < outer")
        if self.delta < 2 * self.rad_outer - 1e-12:
            raise ValueError("collision diameter must cover the tube")


@dataclass(frozen=True)
class Design:
    origin: np.ndarray
    alpha: tuple
    r: tuple
    actuator: ActuatorSpec = ActuatorSpec()
    link: LinkSpec = LinkSpec()

    def __post_init__(self):
        object.__setattr__(self, "origin", point3(self.origin))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        if len(self.alpha) != len(self.r) or not self.alpha:
            raise ValueError("alpha and r must have the same nonzero length")

    @property
    def n_dof(self) -> int:
        return len(self.r)

    def replace(self, **kw):
        values = dict(origin=self.origin, alpha=self.alpha, r=self.r,
                      actuator=self.actuator, link=self.link)
        values.update(kw)
        return Design(**values)


@dataclass(frozen=True)
class ManipulatorState:
    """The 2n+1 global points s_0 (origin) .. s_2n (end-effector)."""

    s: np.ndarray

    @property
    def ef(self) -> np.ndarray:
        return self.s[-1]

    @property
    def n_dof(self) -> int:
        return (len(self.s) - 1) // 2


@dataclass(frozen=True)
class ControlSample:
    t: float
    q: np.ndarray
    q_dot: np.ndarray
    tau: np.ndarray


def dh_transform(theta, d, a, alpha) -> np.ndarray:
    """Classic DH: Rot_z(theta) Trans_z(d) Trans_x(a) Rot_x(alpha)."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _check_q(design, q):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != design.n_dof:
        raise ValueError(f"expected {design.n_dof} joint angles, got {q.shape[0]}")
    return q


def chain(design: Design, q):
    """Fast path used by the numerical code: (points, joint axes, link directions)."""
    return kernels.chain(design.origin, _check_q(design, q), design.alpha, design.r, design.actuator.d)


def forward_kinematics(design: Design, q) -> ManipulatorState:
    pts, _, _ = chain(design, q)
    return ManipulatorState(pts)


def state_segments(state: ManipulatorState):
    out = []
    for j in range(len(state.s) - 1):
        label = f"act_{j // 2 + 1}" if j % 2 == 0 else f"link_{j // 2 + 1}"
        out.append((label, Segment3(state.s[j], state.s[j + 1])))
    return out


def validate_task(task: Task) -> list:
    """Return human-readable rule violations; empty when the task is well formed."""
    problems = []
    pts = task.points
    if not pts:
        return ["task has no points"]
    if pts[0].t != 0.0:
        problems.append("first timestamp must be 0")
    for i in range(1, len(pts)):
        if not pts[i].t > pts[i - 1].t:
            problems.append(f"timestamps must increase strictly (point {i + 1})")
    for i, tp in enumerate(pts):
        if not np.all(np.isfinite(tp.F)) or not math.isfinite(tp.t):
            problems.append(f"task point {i + 1} has non-finite time or load")
        for j, o in enumerate(task.spheres):
            if np.linalg.norm(tp.p - o.c) < o.rad:
                problems.append(f"task point {i + 1} inside obstacle {j + 1}")
    b = task.base
    if not (b.x_min <= b.x_max and b.y_min <= b.y_max):
        problems.append("base region bounds are inverted")
    return problems


__all__ = [
    "GRAVITY", "TaskPoint", "BaseRegion", "Task", "ActuatorSpec", "LinkSpec", "Design",
    "ManipulatorState", "ControlSample", "SphereObstacle", "WallObstacle",
    "dh_transform", "forward_kinematics", "state_segments", "validate_task", "chain",
]
