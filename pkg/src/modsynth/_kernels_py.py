"""Pure-Python kernels.

Reference implementation of the numerical core.  The compiled module
``modsynth._kernels`` exposes the same functions with the same signatures;
``modsynth.kernels`` picks one at import time.
"""
import math

import numpy as np

BACKEND = "python"

_DEGENERATE = 1e-14
_PLANE_TOL = 1e-12


def _clamp01(x):
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def seg_point_distance(a0, a1, p):
    ax, ay, az = float(a0[0]), float(a0[1]), float(a0[2])
    vx, vy, vz = float(a1[0]) - ax, float(a1[1]) - ay, float(a1[2]) - az
    wx, wy, wz = float(p[0]) - ax, float(p[1]) - ay, float(p[2]) - az
    vv = vx * vx + vy * vy + vz * vz
    if vv < _DEGENERATE:
        return math.sqrt(wx * wx + wy * wy + wz * wz)
    t = _clamp01((wx * vx + wy * vy + wz * vz) / vv)
    dx, dy, dz = wx - t * vx, wy - t * vy, wz - t * vz
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def seg_seg_distance(a0, a1, b0, b1):
    """Closest distance between segments a0-a1 and b0-b1 (clamped quadratic)."""
    ux, uy, uz = float(a1[0]) - float(a0[0]), float(a1[1]) - float(a0[1]), float(a1[2]) - float(a0[2])
    vx, vy, vz = float(b1[0]) - float(b0[0]), float(b1[1]) - float(b0[1]), float(b1[2]) - float(b0[2])
    wx, wy, wz = float(a0[0]) - float(b0[0]), float(a0[1]) - float(b0[1]), float(a0[2]) - float(b0[2])
    a = ux * ux + uy * uy + uz * uz
    b = ux * vx + uy * vy + uz * vz
    c = vx * vx + vy * vy + vz * vz
    d = ux * wx + uy * wy + uz * wz
    e = vx * wx + vy * wy + vz * wz
    if a < _DEGENERATE and c < _DEGENERATE:
        return math.sqrt(wx * wx + wy * wy + wz * wz)
    if a < _DEGENERATE:
        return seg_point_distance(b0, b1, a0)
    if c < _DEGENERATE:
        return seg_point_distance(a0, a1, b0)
    den = a * c - b * b
    if den <= 1e-12 * a * c:
        # parallel: the optimum is attained at one of the four endpoints
        return min(
            seg_point_distance(b0, b1, a0),
            seg_point_distance(b0, b1, a1),
            seg_point_distance(a0, a1, b0),
            seg_point_distance(a0, a1, b1),
        )
    s = _clamp01((b * e - c * d) / den)
    t = (b * s + e) / c
    if t < 0.0:
        t = 0.0
        s = _clamp01(-d / a)
    elif t > 1.0:
        t = 1.0
        s = _clamp01((b - d) / a)
    dx = wx + s * ux - t * vx
    dy = wy + s * uy - t * vy
    dz = wz + s * uz - t * vz
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def chain(origin, theta, alpha, r, d):
    """Walk the DH chain.

    Returns ``(pts, z, x)``: the 2n+1 state points, the joint axes
    z_0..z_{n-1} and the link directions x_1..x_n, all in the global frame.
    """
    n = len(theta)
    pts = np.empty((2 * n + 1, 3))
    zs = np.empty((n, 3))
    xs = np.empty((n, 3))
    R = np.eye(3)
    o = np.array(origin, dtype=float)
    pts[0] = o
    for k in range(n):
        ct, st = math.cos(theta[k]), math.sin(theta[k])
        ca, sa = math.cos(alpha[k]), math.sin(alpha[k])
        z = R[:, 2].copy()
        x = ct * R[:, 0] + st * R[:, 1]
        y = -st * R[:, 0] + ct * R[:, 1]
        zs[k] = z
        xs[k] = x
        mid = o + d * z
        o = mid + r[k] * x
        pts[2 * k + 1] = mid
        pts[2 * k + 2] = o
        R = np.column_stack((x, ca * y + sa * z, -sa * y + ca * z))
    return pts, zs, xs


def jacobian(pts, zs):
    n = zs.shape[0]
    ef = pts[2 * n]
    J = np.empty((3, n))
    for k in range(n):
        J[:, k] = np.cross(zs[k], ef - pts[2 * k])
    return J


def sphere_clearances(pts, spheres, delta):
    """Segment-to-centre distance minus (rad + delta), shape (n_spheres, n_segments)."""
    nseg = pts.shape[0] - 1
    out = np.empty((spheres.shape[0], nseg))
    for i in range(spheres.shape[0]):
        c = spheres[i, :3]
        lim = spheres[i, 3] + delta
        for j in range(nseg):
            out[i, j] = seg_point_distance(pts[j], pts[j + 1], c) - lim
    return out


def self_pairs(nseg):
    return [(i, j) for i in range(nseg) for j in range(i + 2, nseg)]


def self_distances(pts):
    """Distances between every non-adjacent segment pair, in ``self_pairs`` order."""
    nseg = pts.shape[0] - 1
    out = np.empty(max(0, (nseg - 1) * (nseg - 2) // 2))
    m = 0
    for i in range(nseg):
        for j in range(i + 2, nseg):
            out[m] = seg_seg_distance(pts[i], pts[i + 1], pts[j], pts[j + 1])
            m += 1
    return out


def _wall_crossing(a, b, wall):
    # wall row: corner0 (3), edge1 (3), edge2 (3), unit normal (3)
    c0 = wall[0:3]
    e1 = wall[3:6]
    e2 = wall[6:9]
    nrm = wall[9:12]
    sa = float(np.dot(nrm, a - c0))
    sb = float(np.dot(nrm, b - c0))
    if not ((sa > _PLANE_TOL and sb < -_PLANE_TOL) or (sa < -_PLANE_TOL and sb > _PLANE_TOL)):
        return False, 0.0
    x = a + (sa / (sa - sb)) * (b - a) - c0
    l1 = float(np.dot(e1, e1))
    l2 = float(np.dot(e2, e2))
    u = float(np.dot(x, e1)) / l1
    w = float(np.dot(x, e2)) / l2
    if u < 0.0 or u > 1.0 or w < 0.0 or w > 1.0:
        return False, 0.0
    depth = min(abs(sa), abs(sb),
                min(u, 1.0 - u) * math.sqrt(l1), min(w, 1.0 - w) * math.sqrt(l2))
    return True, depth


def wall_terms(pts, walls):
    """Binary intersect flags and hinge penetration depths, shape (n_walls, n_segments)."""
    nseg = pts.shape[0] - 1
    hit = np.zeros((walls.shape[0], nseg))
    depth = np.zeros((walls.shape[0], nseg))
    for i in range(walls.shape[0]):
        for j in range(nseg):
            h, dep = _wall_crossing(pts[j], pts[j + 1], walls[i])
            if h:
                hit[i, j] = 1.0
                depth[i, j] = dep
    return hit, depth


def rnea(pts, zs, xs, qd, qdd, body, force, moment, gravity):
    """Recursive Newton-Euler in the global frame.

    ``body`` has one row per module: mass, com (3, module frame), inertia
    about the com (9, module frame, row-major).  The module frame has its
    origin at the joint, z along the joint axis and x along the link.
    ``force``/``moment`` act on the end-effector; the returned torques are
    what the joints must supply.
    """
    n = zs.shape[0]
    w = np.zeros(3)
    wd = np.zeros(3)
    acc = -np.asarray(gravity, dtype=float)
    coms = np.empty((n, 3))
    acom = np.empty((n, 3))
    ws = np.empty((n, 3))
    wds = np.empty((n, 3))
    icom = np.empty((n, 3, 3))
    for k in range(n):
        z = zs[k]
        x = xs[k]
        Rm = np.column_stack((x, np.cross(z, x), z))
        w_prev = w
        w = w_prev + qd[k] * z
        wd = wd + qdd[k] * z + qd[k] * np.cross(w_prev, z)
        o = pts[2 * k]
        c = o + Rm @ body[k, 1:4]
        rc = c - o
        acom[k] = acc + np.cross(wd, rc) + np.cross(w, np.cross(w, rc))
        ro = pts[2 * k + 2] - o
        acc = acc + np.cross(wd, ro) + np.cross(w, np.cross(w, ro))
        coms[k] = c
        ws[k] = w
        wds[k] = wd
        icom[k] = Rm @ body[k, 4:13].reshape(3, 3) @ Rm.T
    f_next = -np.asarray(force, dtype=float)
    n_next = -np.asarray(moment, dtype=float)
    tau = np.empty(n)
    for k in range(n - 1, -1, -1):
        m = body[k, 0]
        c = coms[k]
        f = m * acom[k] + f_next
        Ic = icom[k]
        nm = (Ic @ wds[k] + np.cross(ws[k], Ic @ ws[k]) + n_next
              + np.cross(c - pts[2 * k], f) + np.cross(pts[2 * k + 2] - c, f_next))
        tau[k] = float(np.dot(nm, zs[k]))
        f_next = f
        n_next = nm
    return tau
