"""Constrained NLP engine and the two synthesis formulations.

Decision vector layout (see ``Layout``)::

    [base_x, base_y, alpha_1..alpha_n, r_1..r_n, theta_{1,1}..theta_{n*,n}]

with the joint angles stored waypoint-major.  Every per-waypoint quantity
depends only on the design block and that waypoint's joint angles, which
is what makes the block finite-difference Jacobians below cheap.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from modsynth import kernels
from modsynth.constraints import ConstraintConfig, evaluate_all, wall_clearance
from modsynth.errors import NumericalFailure
from modsynth.geom import pack_spheres, pack_walls
from modsynth.kinodyn import body_table, pinv
from modsynth.model import ActuatorSpec, ControlSample, Design, LinkSpec, Task
from modsynth.plan import sample_trajectory

TWO_PI = 2 * math.pi


# --------------------------------------------------------------------------
# engine


@dataclass
class NlpProblem:
    """min f(x)  s.t.  eq(x) = 0,  ineq(x) >= 0,  lb <= x <= ub.

    The optional ``*_jac`` callables return dense Jacobians; missing ones
    are filled in by forward differences with ``fd_steps``.
    """

    objective: callable
    bounds: tuple
    eq: callable = None
    ineq: callable = None
    objective_grad: callable = None
    eq_jac: callable = None
    ineq_jac: callable = None
    eq_labels: list = None
    ineq_labels: list = None
    fd_steps: np.ndarray = None


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 150
    feas_tol: float = 1e-6
    ftol: float = 1e-9
    trace_path: str = None


@dataclass
class OptResult:
    x: np.ndarray
    converged: bool
    iterations: int
    constraint_violation: float
    objective: float
    message: str = ""
    extras: dict = field(default_factory=dict)


def default_fd_steps(x):
    return 1e-7 * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _check_finite(values, labels, kind):
    values = np.atleast_1d(values)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        name = labels[i] if labels and i < len(labels) else f"{kind}[{i}]"
        raise NumericalFailure(name)


def _fd_jac(fun, x, steps, f0):
    f0 = np.atleast_1d(f0)
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xp[j] += steps[j]
        J[:, j] = (np.atleast_1d(fun(xp)) - f0) / steps[j]
    return J


def violation(p: NlpProblem, x) -> float:
    v = 0.0
    if p.eq is not None:
        e = np.atleast_1d(p.eq(x))
        if e.size:
            v = max(v, float(np.max(np.abs(e))))
    if p.ineq is not None:
        g = np.atleast_1d(p.ineq(x))
        if g.size:
            v = max(v, float(np.max(-g, initial=0.0)))
    lb, ub = p.bounds
    v = max(v, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
    return v


def solve_nlp(p: NlpProblem, x0, cfg: SolverConfig = SolverConfig()) -> OptResult:
    """Local SQP solve (SLSQP) with user or finite-difference derivatives.

    Variables whose lower and upper bounds coincide are held fixed and
    removed from the subproblem.  The returned iterate is the best one seen:
    lowest violation while infeasible, then lowest objective once feasible.
    """
    lb = np.asarray(p.bounds[0], dtype=float)
    ub = np.asarray(p.bounds[1], dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lb, ub)
    free = lb < ub
    steps_full = p.fd_steps if p.fd_steps is not None else default_fd_steps(x0)

    def full(z):
        x = x0.copy()
        x[free] = z
        return x

    def f(z):
        v = float(p.objective(full(z)))
        _check_finite(v, ["objective"], "objective")
        return v

    def g(z):
        x = full(z)
        if p.objective_grad is not None:
            return np.asarray(p.objective_grad(x))[free]
        return _fd_jac(lambda xx: p.objective(xx), x, steps_full, p.objective(x))[0][free]

    cons = []
    if p.eq is not None:
        def ce(z):
            v = np.atleast_1d(p.eq(full(z)))
            _check_finite(v, p.eq_labels, "eq")
            return v

        def ce_jac(z):
            x = full(z)
            if p.eq_jac is not None:
                return np.asarray(p.eq_jac(x))[:, free]
            return _fd_jac(p.eq, x, steps_full, p.eq(x))[:, free]

        m_eq = np.atleast_1d(p.eq(x0)).size
        if m_eq > int(free.sum()):
            # More equalities than free variables corrupts SLSQP's workspace;
            # hold each one inside a two-sided band of half the tolerance.
            w = 0.5 * cfg.feas_tol
            cons.append({"type": "ineq", "fun": lambda z: np.concatenate([w - ce(z), w + ce(z)]),
                         "jac": lambda z: np.vstack([-ce_jac(z), ce_jac(z)])})
        elif m_eq:
            cons.append({"type": "eq", "fun": ce, "jac": ce_jac})
    if p.ineq is not None:
        def ci(z):
            v = np.atleast_1d(p.ineq(full(z)))
            _check_finite(v, p.ineq_labels, "ineq")
            return v

        def ci_jac(z):
            x = full(z)
            if p.ineq_jac is not None:
                return np.asarray(p.ineq_jac(x))[:, free]
            return _fd_jac(p.ineq, x, steps_full, p.ineq(x))[:, free]

        if np.atleast_1d(p.ineq(x0)).size:
            cons.append({"type": "ineq", "fun": ci, "jac": ci_jac})

    best = {"key": None, "x": x0.copy()}
    trace = []

    def consider(x):
        x = np.clip(x, lb, ub)
        viol = violation(p, x)
        obj = float(p.objective(x))
        key = (viol > cfg.feas_tol, viol if viol > cfg.feas_tol else obj)
        if best["key"] is None or key < best["key"]:
            best["key"] = key
            best["x"] = x.copy()
            best["viol"] = viol
            best["obj"] = obj
        return obj, viol

    consider(x0)
    iters = [0]

    def callback(z):
        iters[0] += 1
        obj, viol = consider(full(z))
        trace.append((iters[0], obj, viol))

    z0 = x0[free]
    if z0.size == 0:
        res_msg, ok = "no free variables", True
    else:
        with warnings.catch_warnings():
            # SLSQP clips its own line-search trial points to the box and warns each time
            warnings.filterwarnings("ignore", message="Values in x were outside bounds")
            res = minimize(f, z0, jac=g, method="SLSQP", constraints=cons,
                           bounds=list(zip(lb[free], ub[free])), callback=callback,
                           options={"maxiter": cfg.max_iter, "ftol": cfg.ftol})
        consider(full(np.clip(res.x, lb[free], ub[free])))
        res_msg, ok = str(res.message), bool(res.success)
        iters[0] = max(iters[0], int(res.nit))
    if cfg.trace_path:
        with open(cfg.trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "max_violation"])
            w.writerows(trace)
    conv = bool(ok and best["viol"] <= cfg.feas_tol)
    return OptResult(best["x"], conv, iters[0], best["viol"], best["obj"], res_msg, {"trace": trace})


# --------------------------------------------------------------------------
# decision vector


@dataclass(frozen=True)
class Layout:
    n_dof: int
    n_wp: int

    @property
    def n_design(self) -> int:
        return 2 + 2 * self.n_dof

    @property
    def size(self) -> int:
        return self.n_design + self.n_dof * self.n_wp

    def theta_index(self, i, k) -> int:
        return self.n_design + i * self.n_dof + k

    def split(self, x):
        n = self.n_dof
        return x[:2], x[2:2 + n], x[2 + n:2 + 2 * n], x[self.n_design:].reshape(self.n_wp, n)

    def pack(self, base_xy, alpha, r, thetas):
        return np.concatenate([np.asarray(base_xy, float), np.asarray(alpha, float),
                               np.asarray(r, float), np.asarray(thetas, float).reshape(-1)])

    def design(self, x, task: Task, actuator: ActuatorSpec, link: LinkSpec) -> Design:
        b, al, r, _ = self.split(np.asarray(x, dtype=float))
        return Design((b[0], b[1], task.base.z), tuple(al), tuple(r), actuator, link)

    def bounds(self, task: Task, r_0, r_max):
        n = self.n_dof
        lb = np.full(self.size, -np.inf)
        ub = np.full(self.size, np.inf)
        lb[0], ub[0] = task.base.x_min, task.base.x_max
        lb[1], ub[1] = task.base.y_min, task.base.y_max
        lb[2:2 + n], ub[2:2 + n] = 0.0, TWO_PI
        lb[2 + n:2 + 2 * n], ub[2 + n:2 + 2 * n] = r_0, r_max
        return lb, ub

    def fd_steps(self, x):
        steps = np.full(self.size, 1e-7)
        n = self.n_dof
        rs = slice(2 + n, 2 + 2 * n)
        steps[rs] = 1e-7 * np.maximum(1.0, np.abs(x[rs]))
        steps[:2] = 1e-7 * np.maximum(1.0, np.abs(x[:2]))
        return steps


def random_x0(rng, layout: Layout, task: Task, r_0, r_max):
    n = layout.n_dof
    b = task.base
    base = np.array([rng.uniform(b.x_min, b.x_max), rng.uniform(b.y_min, b.y_max)])
    alpha = rng.uniform(0.0, TWO_PI, n)
    r = np.sort(rng.uniform(r_0, r_max, n))
    th = rng.uniform(-math.pi, math.pi, (layout.n_wp, n))
    return layout.pack(base, alpha, r, th)


# --------------------------------------------------------------------------
# formulations


@dataclass(frozen=True)
class OptConfig:
    constraints: ConstraintConfig = ConstraintConfig()
    solver: SolverConfig = SolverConfig()
    actuator: ActuatorSpec = ActuatorSpec()
    link: LinkSpec = LinkSpec()
    clearance_cap: float = 0.2
    repair_starts: int = 16


class _Formulation:
    """Shared per-waypoint evaluation with block finite differences."""

    def __init__(self, task: Task, waypoints, n_dof: int, cfg: OptConfig, traj=None, torque=False):
        self.task = task
        self.wps = list(waypoints)
        self.cfg = cfg
        self.layout = Layout(n_dof, len(self.wps))
        self.targets = np.array([w.p for w in self.wps], dtype=float)
        self.loads = np.array([w.F for w in self.wps], dtype=float)
        self.spheres = pack_spheres(task.spheres)
        self.walls = pack_walls(task.walls)
        self.margin = cfg.constraints.wall_margin if task.walls else 0.0
        self.torque = torque
        if torque:
            va = [sample_trajectory(traj, w.t) for w in self.wps]
            self.vel = np.array([v for _, v, _ in va])
            self.acc = np.array([a for _, _, a in va])
        self.d = cfg.actuator.d
        self.z0 = task.base.z
        self._cache_key = None
        self._cache = None
        self._jac_key = None
        self._jac = None

    # -- per-waypoint core ------------------------------------------------
    def _design_parts(self, x):
        n = self.layout.n_dof
        base = (x[0], x[1], self.z0)
        return base, x[2:2 + n], x[2 + n:2 + 2 * n]

    def _body(self, r):
        return body_table(Design((0.0, 0.0, 0.0), tuple(np.zeros(len(r))), tuple(r),
                                 self.cfg.actuator, self.cfg.link))

    def _wp(self, base, alpha, r, body, theta, i):
        """(eq, ineq, obj) for waypoint i; see subclasses for the contents."""
        raise NotImplementedError

    def _dyn(self, base, alpha, r, body, theta, i, pts, zs, xs):
        J = kernels.jacobian(pts, zs)
        Jp, _ = pinv(J)
        qd = Jp @ self.vel[i]
        speed = float(np.linalg.norm(qd))
        if speed > 0.0:
            h = 1e-6
            u = qd / speed
            pp, zp, _ = kernels.chain(base, theta + h * u, alpha, r, self.d)
            pm, zm, _ = kernels.chain(base, theta - h * u, alpha, r, self.d)
            Jd = (kernels.jacobian(pp, zp) - kernels.jacobian(pm, zm)) * (speed / (2 * h))
            qdd = Jp @ (self.acc[i] - Jd @ qd)
        else:
            qdd = Jp @ self.acc[i]
        F = self.loads[i]
        return kernels.rnea(pts, zs, xs, qd, qdd, body, F[:3], F[3:], self.cfg.constraints.gravity)

    def _all(self, x):
        key = x.tobytes()
        if key == self._cache_key:
            return self._cache
        base, alpha, r = self._design_parts(x)
        body = self._body(r) if self.torque else None
        th = x[self.layout.n_design:].reshape(self.layout.n_wp, self.layout.n_dof)
        rows = [self._wp(base, alpha, r, body, th[i], i) for i in range(self.layout.n_wp)]
        self._cache_key, self._cache = key, rows
        return rows

    def _jacobians(self, x):
        key = x.tobytes()
        if key == self._jac_key:
            return self._jac
        L = self.layout
        rows0 = self._all(x)
        steps = L.fd_steps(x)
        n_eq = sum(len(r[0]) for r in rows0)
        n_in = sum(len(r[1]) for r in rows0)
        Je = np.zeros((n_eq, L.size))
        Ji = np.zeros((n_in, L.size))
        go = np.zeros(L.size)
        eo = np.cumsum([0] + [len(r[0]) for r in rows0])
        io = np.cumsum([0] + [len(r[1]) for r in rows0])
        th = x[L.n_design:].reshape(L.n_wp, L.n_dof)
        for j in range(L.n_design):
            xp = x.copy()
            xp[j] += steps[j]
            base, alpha, r = self._design_parts(xp)
            body = self._body(r) if self.torque else None
            for i in range(L.n_wp):
                e, g, o = self._wp(base, alpha, r, body, th[i], i)
                Je[eo[i]:eo[i + 1], j] = (e - rows0[i][0]) / steps[j]
                Ji[io[i]:io[i + 1], j] = (g - rows0[i][1]) / steps[j]
                go[j] += (o - rows0[i][2]) / steps[j]
        base, alpha, r = self._design_parts(x)
        body = self._body(r) if self.torque else None
        for i in range(L.n_wp):
            for k in range(L.n_dof):
                col = L.theta_index(i, k)
                t = th[i].copy()
                t[k] += steps[col]
                e, g, o = self._wp(base, alpha, r, body, t, i)
                Je[eo[i]:eo[i + 1], col] = (e - rows0[i][0]) / steps[col]
                Ji[io[i]:io[i + 1], col] = (g - rows0[i][1]) / steps[col]
                go[col] = (o - rows0[i][2]) / steps[col]
        self._jac_key, self._jac = key, (Je, Ji, go)
        return self._jac

    # -- NLP callables ----------------------------------------------------
    def _link_order(self, x):
        n = self.layout.n_dof
        r = x[2 + n:2 + 2 * n]
        return r[1:] - r[:-1]

    def _link_order_jac(self):
        n = self.layout.n_dof
        J = np.zeros((max(0, n - 1), self.layout.size))
        for k in range(n - 1):
            J[k, 2 + n + k] = -1.0
            J[k, 2 + n + k + 1] = 1.0
        return J

    def objective(self, x):
        return float(sum(r[2] for r in self._all(x)))

    def objective_grad(self, x):
        return self._jacobians(x)[2]

    def eq(self, x):
        return np.concatenate([r[0] for r in self._all(x)])

    def eq_jac(self, x):
        return self._jacobians(x)[0]

    def ineq(self, x):
        # Tightened by feas_tol: a result within the solver tolerance of this
        # set satisfies the untightened margins exactly, as the reports demand.
        g = np.concatenate([r[1] for r in self._all(x)] + [self._link_order(x)])
        return g - self.cfg.solver.feas_tol

    def ineq_jac(self, x):
        return np.vstack([self._jacobians(x)[1], self._link_order_jac()])

    def problem(self) -> NlpProblem:
        c = self.cfg.constraints
        lb, ub = self.layout.bounds(self.task, c.r_0, c.r_max)
        return NlpProblem(
            objective=self.objective, bounds=(lb, ub), eq=self.eq, ineq=self.ineq,
            objective_grad=self.objective_grad, eq_jac=self.eq_jac, ineq_jac=self.ineq_jac,
            eq_labels=self.eq_labels(), ineq_labels=self.ineq_labels(),
        )

    def eq_labels(self):
        return [f"h_R[{i + 1}].{ax}" for i in range(self.layout.n_wp) for ax in "xyz"]

    def ineq_labels(self):
        return [f"link_order[{k + 1}]" for k in range(self.layout.n_dof - 1)]


class KinematicFormulation(_Formulation):
    """Soft-collision stage: reach every waypoint, collisions in the cost."""

    def _wp(self, base, alpha, r, body, theta, i):
        pts, _, _ = kernels.chain(base, theta, alpha, r, self.d)
        cap = self.cfg.clearance_cap
        delta = self.cfg.constraints.delta
        gs = kernels.sphere_clearances(pts, self.spheres, delta).min() if self.spheres.shape[0] else math.inf
        sd = kernels.self_distances(pts)
        gsc = sd.min() - 2 * delta if sd.size else math.inf
        hw = kernels.wall_terms(pts, self.walls)[1].max() if self.walls.shape[0] else 0.0
        if self.margin > 0:
            hw += max(0.0, -wall_clearance(pts, self.task.walls, self.margin))
        obj = -min(gs, cap) + hw - min(gsc, cap)
        return pts[-1] - self.targets[i], _EMPTY, obj


_EMPTY = np.zeros(0)


class FullFormulation(_Formulation):
    """Hard-constraint stage with torque margins; cost is -sum of margins."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        n = self.layout.n_dof
        self._nseg = 2 * n
        self._pairs = kernels.self_pairs(2 * n)

    def _wp(self, base, alpha, r, body, theta, i):
        c = self.cfg.constraints
        pts, zs, xs = kernels.chain(base, theta, alpha, r, self.d)
        parts = []
        if self.spheres.shape[0]:
            parts.append(kernels.sphere_clearances(pts, self.spheres, c.delta).reshape(-1))
        sd = kernels.self_distances(pts)
        if sd.size:
            parts.append(sd - 2 * c.delta)
        if self.walls.shape[0]:
            parts.append(np.array([-kernels.wall_terms(pts, self.walls)[1].max()]))
        if self.margin > 0:
            parts.append(np.array([wall_clearance(pts, self.task.walls, self.margin)]))
        obj = 0.0
        if self.torque:
            tau = self._dyn(base, alpha, r, body, theta, i, pts, zs, xs)
            tmax = self.cfg.actuator.tau_max
            bt = c.beta * tau
            scale = tmax if tmax > 0 else 1.0
            parts.append((tmax - bt) / scale)
            parts.append((tmax + bt) / scale)
            obj = -float(np.min(tmax - np.abs(bt)))
        return pts[-1] - self.targets[i], np.concatenate(parts) if parts else _EMPTY, obj

    def ineq_labels(self):
        n = self.layout.n_dof
        seg = [f"act_{k // 2 + 1}" if k % 2 == 0 else f"link_{k // 2 + 1}" for k in range(2 * n)]
        out = []
        for i in range(self.layout.n_wp):
            w = i + 1
            out += [f"g_S[{w}](sphere {s + 1}, {seg[k]})" for s in range(self.spheres.shape[0]) for k in range(2 * n)]
            out += [f"g_SC[{w}]({seg[a]}, {seg[b]})" for a, b in self._pairs]
            if self.walls.shape[0]:
                out.append(f"h_W[{w}]")
            if self.margin > 0:
                out.append(f"h_W[{w}](margin)")
            if self.torque:
                out += [f"g_tau[{w}](+joint {k + 1})" for k in range(n)]
                out += [f"g_tau[{w}](-joint {k + 1})" for k in range(n)]
        return out + super().ineq_labels()


# --------------------------------------------------------------------------
# stages


def controls_from_x(layout: Layout, x, waypoints, design: Design, traj=None, gravity=None):
    """Per-waypoint control samples (q, q_dot, tau) for a decision vector."""
    from modsynth.kinodyn import waypoint_dynamics
    from modsynth.model import GRAVITY

    g = GRAVITY if gravity is None else gravity
    _, _, _, th = layout.split(np.asarray(x, dtype=float))
    out = []
    for i, w in enumerate(waypoints):
        if traj is not None:
            _, v, a = sample_trajectory(traj, w.t)
            qd, _, tau, _ = waypoint_dynamics(design, th[i], v, a, w.F, gravity=g)
        else:
            qd, tau = np.zeros(layout.n_dof), np.zeros(layout.n_dof)
        out.append(ControlSample(w.t, th[i].copy(), qd, tau))
    return out


def kinematic_optimize(task: Task, waypoints, n_dof: int, x0, cfg: OptConfig, rng=None) -> OptResult:
    """Soft-collision kinematic stage followed by collision repair of the
    waypoint configurations (collision-aware IK from perturbed starts)."""
    from modsynth.verify import IkConfig, inverse_kinematics

    form = KinematicFormulation(task, waypoints, n_dof, cfg)
    res = solve_nlp(form.problem(), x0, cfg.solver)
    L = form.layout
    design = L.design(res.x, task, cfg.actuator, cfg.link)
    ccfg = cfg.constraints
    x = res.x.copy()
    repaired = []
    rng = np.random.default_rng(0) if rng is None else rng
    ik_cfg = IkConfig(restarts=cfg.repair_starts)
    for i, w in enumerate(waypoints):
        q = x[L.theta_index(i, 0):L.theta_index(i, 0) + n_dof]
        if _collides(design, q, task, ccfg):
            sol = inverse_kinematics(design, w.p, q, task, ik_cfg, ccfg, rng=rng)
            if sol is not None:
                x[L.theta_index(i, 0):L.theta_index(i, 0) + n_dof] = sol
                repaired.append(i)
    res.x = x
    res.extras["repaired"] = repaired
    return res


def _collides(design, q, task, ccfg) -> bool:
    from modsynth.verify import configuration_collision_free

    return not configuration_collision_free(design, q, task, ccfg)


def full_optimize(task: Task, waypoints, n_dof: int, x0, cfg: OptConfig, traj, torque=True) -> OptResult:
    form = FullFormulation(task, waypoints, n_dof, cfg, traj=traj, torque=torque)
    return solve_nlp(form.problem(), x0, cfg.solver)


def feasibility_probe(result: OptResult, task: Task, waypoints, n_dof: int, cfg: OptConfig, traj=None) -> bool:
    """True iff the stage result already satisfies every constraint, torque included
    (unless the constraint config disables torque checks)."""
    if not waypoints:
        return True
    L = Layout(n_dof, len(waypoints))
    design = L.design(result.x, task, cfg.actuator, cfg.link)
    controls = controls_from_x(L, result.x, waypoints, design, None)
    report = evaluate_all(design, controls, waypoints, task, cfg.constraints, traj=traj)
    return report.feasible
