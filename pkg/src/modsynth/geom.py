"""Segments, spheres and rectangular walls, and the distance/intersection
queries the collision constraints are built on."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from modsynth import kernels
from modsynth.errors import ConfigurationError

WALL_TOL = 1e-9


def point3(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite point {p!r}")
    return a


class Segment3(NamedTuple):
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def of(cls, a, b):
        return cls(point3(a), point3(b))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))


@dataclass(frozen=True)
class SphereObstacle:
    c: np.ndarray
    rad: float

    def __post_init__(self):
        object.__setattr__(self, "c", point3(self.c))
        if not self.rad > 0:
            raise ConfigurationError(f"sphere radius must be positive, got {self.rad}")


@dataclass(frozen=True)
class WallObstacle:
    """Thin rectangle given by its four corners in cyclic order."""

    corners: np.ndarray
    packed: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float)
        if c.shape != (4, 3) or not np.all(np.isfinite(c)):
            raise ConfigurationError("a wall needs four finite 3D corners")
        e1 = c[1] - c[0]
        e2 = c[3] - c[0]
        nrm = np.cross(e1, e2)
        area = np.linalg.norm(nrm)
        if area < WALL_TOL:
            raise ConfigurationError("degenerate wall")
        nrm = nrm / area
        # opposite corner must close the rectangle, all in one plane
        if abs(np.dot(nrm, c[2] - c[0])) > WALL_TOL or np.linalg.norm(c[2] - (c[1] + e2)) > WALL_TOL:
            raise ConfigurationError("wall corners are not a planar rectangle")
        if abs(np.dot(e1, e2)) > WALL_TOL * max(1.0, np.linalg.norm(e1) * np.linalg.norm(e2)):
            raise ConfigurationError("wall edges are not orthogonal")
        object.__setattr__(self, "corners", c)
        object.__setattr__(self, "packed", np.concatenate([c[0], e1, e2, nrm]))

    @property
    def normal(self) -> np.ndarray:
        return self.packed[9:12]


def seg_seg_distance(s1: Segment3, s2: Segment3) -> float:
    return kernels.seg_seg_distance(s1.a, s1.b, s2.a, s2.b)


def seg_point_distance(s: Segment3, p) -> float:
    return kernels.seg_point_distance(s.a, s.b, point3(p))


def seg_wall_intersect(s: Segment3, w: WallObstacle) -> bool:
    """True iff the endpoints lie strictly on opposite sides of the wall's
    plane and the crossing point falls inside the rectangle."""
    pts = np.ascontiguousarray(np.vstack([s.a, s.b]))
    hit, _ = kernels.wall_terms(pts, w.packed.reshape(1, 12))
    return bool(hit[0, 0])


def point_wall_distance(p, w: WallObstacle) -> float:
    """Distance from a point to the (filled) wall rectangle."""
    c0, e1, e2 = w.packed[0:3], w.packed[3:6], w.packed[6:9]
    rel = point3(p) - c0
    u = min(max(rel @ e1 / (e1 @ e1), 0.0), 1.0)
    v = min(max(rel @ e2 / (e2 @ e2), 0.0), 1.0)
    return float(np.linalg.norm(rel - u * e1 - v * e2))


def seg_wall_distance(s: Segment3, w: WallObstacle) -> float:
    """Distance from a segment to the wall rectangle; 0 when they meet.

    Off the wall the closest pair involves a segment endpoint or one of the
    four rectangle edges.
    """
    if seg_wall_intersect(s, w):
        return 0.0
    c = w.corners
    best = min(point_wall_distance(s.a, w), point_wall_distance(s.b, w))
    for k in range(4):
        best = min(best, kernels.seg_seg_distance(s.a, s.b, c[k], c[(k + 1) % 4]))
    return float(best)


def point_in_sphere(p, o: SphereObstacle) -> bool:
    return bool(np.linalg.norm(point3(p) - o.c) < o.rad)


def pack_spheres(spheres) -> np.ndarray:
    if not spheres:
        return np.zeros((0, 4))
    return np.ascontiguousarray([[*s.c, s.rad] for s in spheres], dtype=float)


def pack_walls(walls) -> np.ndarray:
    if not walls:
        return np.zeros((0, 12))
    return np.ascontiguousarray([w.packed for w in walls], dtype=float)
