"""Differential kinematics, module inertia and Newton-Euler inverse dynamics."""
import math
from dataclasses import dataclass

import numpy as np

from modsynth import kernels
from modsynth.errors import ConfigurationError
from modsynth.model import GRAVITY, ActuatorSpec, Design, LinkSpec, chain

SINGULAR_SIGMA = 1e-8
PINV_RCOND = 1e-8
JDOT_STEP = 1e-6


@dataclass(frozen=True)
class InertiaTensor:
    """Mass properties of one module in its module frame.

    The module frame sits on the joint, z along the joint axis and x along
    the link; ``matrix`` is taken about that origin.
    """

    matrix: np.ndarray
    mass: float
    com: np.ndarray

    def about_com(self) -> np.ndarray:
        c = self.com
        return self.matrix - self.mass * (np.dot(c, c) * np.eye(3) - np.outer(c, c))


def _shift(I_com, m, c):
    c = np.asarray(c, dtype=float)
    return I_com + m * (np.dot(c, c) * np.eye(3) - np.outer(c, c))


def solid_cylinder_z(m, radius, height):
    ixx = m * (3 * radius ** 2 + height ** 2) / 12
    return np.diag([ixx, ixx, m * radius ** 2 / 2])


def hollow_cylinder_x(m, rad_in, rad_out, length):
    s = rad_in ** 2 + rad_out ** 2
    iyy = m * (3 * s + length ** 2) / 12
    return np.diag([m * s / 2, iyy, iyy])


def link_mass(spec_l: LinkSpec, r_k) -> float:
    return spec_l.density * math.pi * (spec_l.rad_outer ** 2 - spec_l.rad_inner ** 2) * r_k


def module_inertia(spec_a: ActuatorSpec, spec_l: LinkSpec, r_k: float) -> InertiaTensor:
    d = spec_a.d
    m_a = spec_a.mass
    m_l = link_mass(spec_l, r_k)
    c_a = np.array([0.0, 0.0, d / 2])
    c_l = np.array([r_k / 2, 0.0, d])
    I = _shift(solid_cylinder_z(m_a, spec_a.body_radius, spec_a.body_height), m_a, c_a)
    if m_l > 0:
        I = I + _shift(hollow_cylinder_x(m_l, spec_l.rad_inner, spec_l.rad_outer, r_k), m_l, c_l)
    m = m_a + m_l
    return InertiaTensor(I, m, (m_a * c_a + m_l * c_l) / m)


def body_table(design: Design) -> np.ndarray:
    """Rows of (mass, com[3], inertia-about-com[9]) in module frames, for the kernels."""
    rows = []
    for r_k in design.r:
        it = module_inertia(design.actuator, design.link, r_k)
        rows.append(np.concatenate([[it.mass], it.com, it.about_com().reshape(9)]))
    return np.ascontiguousarray(rows)


def linear_jacobian(design: Design, q) -> np.ndarray:
    pts, zs, _ = chain(design, q)
    return kernels.jacobian(pts, zs)


def pinv(J):
    """Moore-Penrose inverse by SVD, plus the near-singularity flag."""
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    smax = s[0] if s.size else 0.0
    keep = s > PINV_RCOND * smax
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    Jp = (Vt.T * inv) @ U.T
    return Jp, bool(s.size == 0 or s[-1] < SINGULAR_SIGMA)


def joint_velocities(J, v):
    """Minimum-norm joint rates for EF velocity ``v``; returns (q_dot, singular)."""
    Jp, singular = pinv(np.asarray(J, dtype=float))
    return Jp @ np.asarray(v, dtype=float), singular


def jacobian_dot(design: Design, q, q_dot, h=JDOT_STEP):
    """dJ/dt = sum_k dJ/dtheta_k * theta_dot_k, by a central difference along q_dot."""
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    speed = float(np.linalg.norm(q_dot))
    if speed == 0.0:
        return np.zeros((3, design.n_dof))
    u = q_dot / speed
    return (linear_jacobian(design, q + h * u) - linear_jacobian(design, q - h * u)) * (speed / (2 * h))


def joint_accelerations(design: Design, q, q_dot, a):
    """q_ddot = J+ (a - Jdot q_dot); returns (q_ddot, singular)."""
    J = linear_jacobian(design, q)
    Jp, singular = pinv(J)
    rhs = np.asarray(a, dtype=float) - jacobian_dot(design, q, q_dot) @ np.asarray(q_dot, dtype=float)
    return Jp @ rhs, singular


def rnea(design: Design, q, q_dot, q_ddot, F_ef=None, gravity=GRAVITY, body=None) -> np.ndarray:
    """Joint torques for the prescribed motion.

    ``F_ef`` is the wrench (force, moment) exerted on the end-effector by
    the payload/environment; the base is static.
    """
    pts, zs, xs = chain(design, q)
    if body is None:
        body = body_table(design)
    F = np.zeros(6) if F_ef is None else np.asarray(F_ef, dtype=float)
    return kernels.rnea(pts, zs, xs, np.asarray(q_dot, dtype=float), np.asarray(q_ddot, dtype=float),
                        body, F[:3], F[3:], gravity)


def torque_margin(tau, tau_max, beta) -> float:
    """min_k (tau_max - |beta * tau_k|)."""
    if beta < 1:
        raise ConfigurationError(f"safety factor must be >= 1, got {beta}")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return float(np.min(tau_max - np.abs(beta * tau)))


def waypoint_dynamics(design: Design, q, v, a, F, body=None, gravity=GRAVITY):
    """Joint rates, accelerations and torques when the EF passes through
    its current position with velocity ``v`` and acceleration ``a``.

    Returns (q_dot, q_ddot, tau, singular).
    """
    q = np.asarray(q, dtype=float)
    pts, zs, xs = chain(design, q)
    J = kernels.jacobian(pts, zs)
    Jp, singular = pinv(J)
    qd = Jp @ np.asarray(v, dtype=float)
    qdd = Jp @ (np.asarray(a, dtype=float) - jacobian_dot(design, q, qd) @ qd)
    if body is None:
        body = body_table(design)
    F = np.asarray(F, dtype=float)
    tau = kernels.rnea(pts, zs, xs, qd, qdd, body, F[:3], F[3:], gravity)
    return qd, qdd, tau, singular
