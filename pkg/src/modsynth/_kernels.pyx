# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same surface as ``modsynth._kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs

cnp.import_array()

BACKEND = "cython"

cdef double _DEGENERATE = 1e-14
cdef double _PLANE_TOL = 1e-12


cdef inline double _clamp01(double x) nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


cdef inline void _cross(double* a, double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(double* a, double* b) nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef double _seg_point(double ax, double ay, double az, double bx, double by, double bz,
                       double px, double py, double pz) nogil:
    cdef double vx = bx - ax, vy = by - ay, vz = bz - az
    cdef double wx = px - ax, wy = py - ay, wz = pz - az
    cdef double vv = vx * vx + vy * vy + vz * vz
    cdef double t, dx, dy, dz
    if vv < _DEGENERATE:
        return sqrt(wx * wx + wy * wy + wz * wz)
    t = _clamp01((wx * vx + wy * vy + wz * vz) / vv)
    dx = wx - t * vx
    dy = wy - t * vy
    dz = wz - t * vz
    return sqrt(dx * dx + dy * dy + dz * dz)


cdef double _seg_seg(double* a0, double* a1, double* b0, double* b1) nogil:
    cdef double ux = a1[0] - a0[0], uy = a1[1] - a0[1], uz = a1[2] - a0[2]
    cdef double vx = b1[0] - b0[0], vy = b1[1] - b0[1], vz = b1[2] - b0[2]
    cdef double wx = a0[0] - b0[0], wy = a0[1] - b0[1], wz = a0[2] - b0[2]
    cdef double a = ux * ux + uy * uy + uz * uz
    cdef double b = ux * vx + uy * vy + uz * vz
    cdef double c = vx * vx + vy * vy + vz * vz
    cdef double d = ux * wx + uy * wy + uz * wz
    cdef double e = vx * wx + vy * wy + vz * wz
    cdef double den, s, t, dx, dy, dz, m, q
    if a < _DEGENERATE and c < _DEGENERATE:
        return sqrt(wx * wx + wy * wy + wz * wz)
    if a < _DEGENERATE:
        return _seg_point(b0[0], b0[1], b0[2], b1[0], b1[1], b1[2], a0[0], a0[1], a0[2])
    if c < _DEGENERATE:
        return _seg_point(a0[0], a0[1], a0[2], a1[0], a1[1], a1[2], b0[0], b0[1], b0[2])
    den = a * c - b * b
    if den <= 1e-12 * a * c:
        m = _seg_point(b0[0], b0[1], b0[2], b1[0], b1[1], b1[2], a0[0], a0[1], a0[2])
        q = _seg_point(b0[0], b0[1], b0[2], b1[0], b1[1], b1[2], a1[0], a1[1], a1[2])
        if q < m:
            m = q
        q = _seg_point(a0[0], a0[1], a0[2], a1[0], a1[1], a1[2], b0[0], b0[1], b0[2])
        if q < m:
            m = q
        q = _seg_point(a0[0], a0[1], a0[2], a1[0], a1[1], a1[2], b1[0], b1[1], b1[2])
        if q < m:
            m = q
        return m
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
    return sqrt(dx * dx + dy * dy + dz * dz)


def seg_point_distance(a0, a1, p):
    return _seg_point(float(a0[0]), float(a0[1]), float(a0[2]),
                      float(a1[0]), float(a1[1]), float(a1[2]),
                      float(p[0]), float(p[1]), float(p[2]))


def seg_seg_distance(a0, a1, b0, b1):
    cdef double A0[3]
    cdef double A1[3]
    cdef double B0[3]
    cdef double B1[3]
    cdef int i
    for i in range(3):
        A0[i] = float(a0[i])
        A1[i] = float(a1[i])
        B0[i] = float(b0[i])
        B1[i] = float(b1[i])
    return _seg_seg(A0, A1, B0, B1)


def chain(origin, theta, alpha, r, double d):
    cdef Py_ssize_t n = len(theta)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.empty((2 * n + 1, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zs = np.empty((n, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xs = np.empty((n, 3))
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[::1] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef double X[3]
    cdef double Y[3]
    cdef double Z[3]
    cdef double x[3]
    cdef double y[3]
    cdef double o[3]
    cdef double ct, st, ca, sa
    cdef Py_ssize_t k, i
    X[0] = 1.0; X[1] = 0.0; X[2] = 0.0
    Y[0] = 0.0; Y[1] = 1.0; Y[2] = 0.0
    Z[0] = 0.0; Z[1] = 0.0; Z[2] = 1.0
    for i in range(3):
        o[i] = float(origin[i])
        pts[0, i] = o[i]
    for k in range(n):
        ct = cos(th[k])
        st = sin(th[k])
        ca = cos(al[k])
        sa = sin(al[k])
        for i in range(3):
            x[i] = ct * X[i] + st * Y[i]
            y[i] = -st * X[i] + ct * Y[i]
            zs[k, i] = Z[i]
            xs[k, i] = x[i]
            o[i] = o[i] + d * Z[i]
            pts[2 * k + 1, i] = o[i]
            o[i] = o[i] + rr[k] * x[i]
            pts[2 * k + 2, i] = o[i]
        for i in range(3):
            X[i] = x[i]
            Y[i] = ca * y[i] + sa * Z[i]
            Z[i] = -sa * y[i] + ca * Z[i]
    return pts, zs, xs


def jacobian(double[:, ::1] pts, double[:, ::1] zs):
    cdef Py_ssize_t n = zs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] J = np.empty((3, n))
    cdef Py_ssize_t k
    cdef double ex = pts[2 * n, 0], ey = pts[2 * n, 1], ez = pts[2 * n, 2]
    cdef double rx, ry, rz
    for k in range(n):
        rx = ex - pts[2 * k, 0]
        ry = ey - pts[2 * k, 1]
        rz = ez - pts[2 * k, 2]
        J[0, k] = zs[k, 1] * rz - zs[k, 2] * ry
        J[1, k] = zs[k, 2] * rx - zs[k, 0] * rz
        J[2, k] = zs[k, 0] * ry - zs[k, 1] * rx
    return J


def sphere_clearances(double[:, ::1] pts, double[:, ::1] spheres, double delta):
    cdef Py_ssize_t nseg = pts.shape[0] - 1
    cdef Py_ssize_t ns = spheres.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((ns, nseg))
    cdef Py_ssize_t i, j
    for i in range(ns):
        for j in range(nseg):
            out[i, j] = _seg_point(pts[j, 0], pts[j, 1], pts[j, 2],
                                   pts[j + 1, 0], pts[j + 1, 1], pts[j + 1, 2],
                                   spheres[i, 0], spheres[i, 1], spheres[i, 2]) - (spheres[i, 3] + delta)
    return out


def self_pairs(nseg):
    return [(i, j) for i in range(nseg) for j in range(i + 2, nseg)]


def self_distances(double[:, ::1] pts):
    cdef Py_ssize_t nseg = pts.shape[0] - 1
    cdef Py_ssize_t npair = (nseg - 1) * (nseg - 2) // 2 if nseg >= 2 else 0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(npair)
    cdef Py_ssize_t i, j, m = 0
    for i in range(nseg):
        for j in range(i + 2, nseg):
            out[m] = _seg_seg(&pts[i, 0], &pts[i + 1, 0], &pts[j, 0], &pts[j + 1, 0])
            m += 1
    return out


cdef int _wall_crossing(double* a, double* b, double* wall, double* depth) nogil:
    cdef double* c0 = wall
    cdef double* e1 = wall + 3
    cdef double* e2 = wall + 6
    cdef double* nrm = wall + 9
    cdef double da[3]
    cdef double x[3]
    cdef double sa, sb, f, l1, l2, u, w, m
    cdef int i
    for i in range(3):
        da[i] = a[i] - c0[i]
    sa = _dot(nrm, da)
    for i in range(3):
        da[i] = b[i] - c0[i]
    sb = _dot(nrm, da)
    if not ((sa > _PLANE_TOL and sb < -_PLANE_TOL) or (sa < -_PLANE_TOL and sb > _PLANE_TOL)):
        return 0
    f = sa / (sa - sb)
    for i in range(3):
        x[i] = a[i] + f * (b[i] - a[i]) - c0[i]
    l1 = _dot(e1, e1)
    l2 = _dot(e2, e2)
    u = _dot(x, e1) / l1
    w = _dot(x, e2) / l2
    if u < 0.0 or u > 1.0 or w < 0.0 or w > 1.0:
        return 0
    m = fabs(sa)
    if fabs(sb) < m:
        m = fabs(sb)
    f = (u if u < 1.0 - u else 1.0 - u) * sqrt(l1)
    if f < m:
        m = f
    f = (w if w < 1.0 - w else 1.0 - w) * sqrt(l2)
    if f < m:
        m = f
    depth[0] = m
    return 1


def wall_terms(double[:, ::1] pts, double[:, ::1] walls):
    cdef Py_ssize_t nseg = pts.shape[0] - 1
    cdef Py_ssize_t nw = walls.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hit = np.zeros((nw, nseg))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] depth = np.zeros((nw, nseg))
    cdef Py_ssize_t i, j
    cdef double dep
    for i in range(nw):
        for j in range(nseg):
            dep = 0.0
            if _wall_crossing(&pts[j, 0], &pts[j + 1, 0], &walls[i, 0], &dep):
                hit[i, j] = 1.0
                depth[i, j] = dep
    return hit, depth


def rnea(double[:, ::1] pts, double[:, ::1] zs, double[:, ::1] xs, qd, qdd,
         double[:, ::1] body, force, moment, gravity):
    cdef Py_ssize_t n = zs.shape[0]
    cdef double[::1] vqd = np.ascontiguousarray(qd, dtype=np.float64)
    cdef double[::1] vqdd = np.ascontiguousarray(qdd, dtype=np.float64)
    cdef double[:, ::1] coms = np.empty((n, 3))
    cdef double[:, ::1] acom = np.empty((n, 3))
    cdef double[:, ::1] ws = np.empty((n, 3))
    cdef double[:, ::1] wds = np.empty((n, 3))
    cdef double[:, :, ::1] icom = np.empty((n, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.empty(n)
    cdef double w[3]
    cdef double wd[3]
    cdef double acc[3]
    cdef double wp[3]
    cdef double Rm[3][3]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double rc[3]
    cdef double ro[3]
    cdef double f[3]
    cdef double fn[3]
    cdef double nn[3]
    cdef double nm[3]
    cdef double Iw[3]
    cdef double m, s
    cdef Py_ssize_t k, i, j, l
    for i in range(3):
        w[i] = 0.0
        wd[i] = 0.0
        acc[i] = -float(gravity[i])
    for k in range(n):
        # module frame: x = link direction, y = z cross x, z = joint axis
        for i in range(3):
            Rm[i][0] = xs[k, i]
            Rm[i][2] = zs[k, i]
        Rm[0][1] = zs[k, 1] * xs[k, 2] - zs[k, 2] * xs[k, 1]
        Rm[1][1] = zs[k, 2] * xs[k, 0] - zs[k, 0] * xs[k, 2]
        Rm[2][1] = zs[k, 0] * xs[k, 1] - zs[k, 1] * xs[k, 0]
        for i in range(3):
            wp[i] = w[i]
            w[i] = wp[i] + vqd[k] * zs[k, i]
        _cross(wp, &zs[k, 0], tmp)
        for i in range(3):
            wd[i] = wd[i] + vqdd[k] * zs[k, i] + vqd[k] * tmp[i]
        for i in range(3):
            rc[i] = Rm[i][0] * body[k, 1] + Rm[i][1] * body[k, 2] + Rm[i][2] * body[k, 3]
            coms[k, i] = pts[2 * k, i] + rc[i]
            ro[i] = pts[2 * k + 2, i] - pts[2 * k, i]
        _cross(wd, rc, tmp)
        _cross(w, rc, tmp2)
        _cross(w, tmp2, rc)
        for i in range(3):
            acom[k, i] = acc[i] + tmp[i] + rc[i]
        _cross(wd, ro, tmp)
        _cross(w, ro, tmp2)
        _cross(w, tmp2, ro)
        for i in range(3):
            acc[i] = acc[i] + tmp[i] + ro[i]
            ws[k, i] = w[i]
            wds[k, i] = wd[i]
        for i in range(3):
            for j in range(3):
                s = 0.0
                for l in range(3):
                    s = s + Rm[i][l] * (body[k, 4 + 3 * l + 0] * Rm[j][0]
                                        + body[k, 4 + 3 * l + 1] * Rm[j][1]
                                        + body[k, 4 + 3 * l + 2] * Rm[j][2])
                icom[k, i, j] = s
    for i in range(3):
        fn[i] = -float(force[i])
        nn[i] = -float(moment[i])
    for k in range(n - 1, -1, -1):
        m = body[k, 0]
        for i in range(3):
            f[i] = m * acom[k, i] + fn[i]
        for i in range(3):
            Iw[i] = icom[k, i, 0] * ws[k, 0] + icom[k, i, 1] * ws[k, 1] + icom[k, i, 2] * ws[k, 2]
        _cross(&ws[k, 0], Iw, tmp)
        for i in range(3):
            nm[i] = (icom[k, i, 0] * wds[k, 0] + icom[k, i, 1] * wds[k, 1] + icom[k, i, 2] * wds[k, 2]
                     + tmp[i] + nn[i])
        for i in range(3):
            rc[i] = coms[k, i] - pts[2 * k, i]
            ro[i] = pts[2 * k + 2, i] - coms[k, i]
        _cross(rc, f, tmp)
        _cross(ro, fn, tmp2)
        for i in range(3):
            nm[i] = nm[i] + tmp[i] + tmp2[i]
        tau[k] = nm[0] * zs[k, 0] + nm[1] * zs[k, 1] + nm[2] * zs[k, 2]
        for i in range(3):
            fn[i] = f[i]
            nn[i] = nm[i]
    return tau
