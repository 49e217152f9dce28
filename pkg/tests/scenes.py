"""Fixture scenes shared by the tests, the acceptance suite and the benchmark."""
import numpy as np

from modsynth.geom import SphereObstacle, WallObstacle
from modsynth.model import BaseRegion, Design, Task, TaskPoint, forward_kinematics

PAYLOAD = np.array([0.0, 0.0, -0.33, 0.0, 0.0, 0.0])  # 33 g held against gravity


def box_walls(x0, x1, y0, y1, z0, z1, open_face="x0"):
    """Five (or six) thin walls of an axis-aligned box, one face left open."""
    faces = {
        "x0": [(x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)],
        "x1": [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
        "y0": [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
        "y1": [(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)],
        "z0": [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)],
        "z1": [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
    }
    return [WallObstacle(np.array(c, dtype=float)) for k, c in faces.items() if k != open_face]


CABINET = (0.35, 0.65, -0.25, 0.25, 0.0, 0.5)


def cabinet(shelf=False):
    """Desk-scale cabinet: pick up outside, carry into the cabinet, lower to the bottom."""
    x0, x1, y0, y1, z0, z1 = CABINET
    walls = box_walls(x0, x1, y0, y1, z0, z1)
    if shelf:
        # middle shelf, leaving a gap at the front
        walls.append(WallObstacle(np.array([(0.45, y0, 0.2), (x1, y0, 0.2), (x1, y1, 0.2), (0.45, y1, 0.2)])))
    pts = [
        TaskPoint((0.2, 0.25, 0.3), 0.0),
        TaskPoint((0.5, 0.0, 0.3), 2.0, PAYLOAD),
        TaskPoint((0.5, 0.0, 0.1), 6.0, PAYLOAD),
    ]
    return Task(pts, walls=walls, base=BaseRegion(-0.1, 0.1, -0.1, 0.1, 0.0))


TABLE1_DESIGN = Design((0.0, 0.0, 0.0), (np.pi / 2, 0.0), (0.2, 0.3))
TABLE1_Q = [(0.0, 0.3), (0.9, -0.3), (1.8, 0.4)]


def table1():
    """Task points reachable by a known 2-DOF arm, with spheres on the straight legs."""
    ps = [forward_kinematics(TABLE1_DESIGN, q).ef for q in TABLE1_Q]
    pts = [TaskPoint(p, t) for p, t in zip(ps, (0.0, 3.0, 6.0))]
    spheres = [SphereObstacle((a + b) / 2, 0.05) for a, b in zip(ps, ps[1:])]
    return Task(pts, spheres=spheres, base=BaseRegion.fixed(0.0, 0.0, 0.0))


def golden(load=None):
    """Small obstacle-free three-point task for a 3-DOF arm."""
    F = PAYLOAD if load is None else np.asarray(load, dtype=float)
    pts = [
        TaskPoint((0.3, 0.1, 0.25), 0.0),
        TaskPoint((0.25, -0.15, 0.3), 2.0, F),
        TaskPoint((0.35, 0.0, 0.15), 4.0, F),
    ]
    return Task(pts, base=BaseRegion(-0.05, 0.05, -0.05, 0.05, 0.0))


def free_two_point():
    pts = [TaskPoint((0.3, 0.0, 0.2), 0.0), TaskPoint((0.2, 0.25, 0.3), 2.0)]
    return Task(pts, base=BaseRegion(-0.05, 0.05, -0.05, 0.05, 0.0))
