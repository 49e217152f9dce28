"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root after building the extension:

    python3 benchmarks/bench_kernels.py [--repeat N]

Each row times one kernel call on inputs of the size the optimizer sees
(a 6-DOF chain, four spheres, five walls) and reports the speed-up.  The
last row adds up the chain-level kernels, roughly one constraint
evaluation for one waypoint.
"""
import argparse
import sys
import timeit

import numpy as np

from modsynth import _kernels_py as py
from modsynth.geom import WallObstacle

try:
    from modsynth import _kernels as cy
except ImportError:
    sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")


def inputs(seed=0, n=6):
    rng = np.random.default_rng(seed)
    origin = rng.normal(size=3) * 0.1
    theta = rng.uniform(-np.pi, np.pi, n)
    alpha = rng.uniform(0, 2 * np.pi, n)
    r = np.sort(rng.uniform(0.1, 0.3, n))
    pts, zs, xs = py.chain(origin, theta, alpha, r, 0.1)
    spheres = np.column_stack([rng.normal(size=(4, 3)) * 0.3, rng.uniform(0.02, 0.08, 4)])
    walls = []
    for _ in range(5):
        c0 = rng.normal(size=3) * 0.3
        e1 = rng.normal(size=3)
        e1 *= 0.4 / np.linalg.norm(e1)
        e2 = np.cross(e1, rng.normal(size=3))
        e2 *= 0.4 / np.linalg.norm(e2)
        walls.append(WallObstacle(np.array([c0, c0 + e1, c0 + e1 + e2, c0 + e2])).packed)
    body = np.column_stack([rng.uniform(0.1, 1, n), rng.normal(size=(n, 3)) * 0.1,
                            np.tile(np.eye(3).reshape(9) * 1e-3, (n, 1))])
    return dict(chain=(origin, theta, alpha, r, 0.1), pts=pts, zs=zs, xs=xs, spheres=spheres,
                walls=np.ascontiguousarray(walls), body=body, qd=rng.normal(size=n), qdd=rng.normal(size=n),
                f=rng.normal(size=3), m=rng.normal(size=3), seg=rng.normal(size=(4, 3)))


def cases(impl, a):
    g = (0.0, 0.0, -9.81)
    s = a["seg"]
    return {
        "seg_seg_distance": lambda: impl.seg_seg_distance(s[0], s[1], s[2], s[3]),
        "chain (6 DOF)": lambda: impl.chain(*a["chain"]),
        "jacobian": lambda: impl.jacobian(a["pts"], a["zs"]),
        "sphere_clearances": lambda: impl.sphere_clearances(a["pts"], a["spheres"], 0.04),
        "self_distances": lambda: impl.self_distances(a["pts"]),
        "wall_terms": lambda: impl.wall_terms(a["pts"], a["walls"]),
        "rnea": lambda: impl.rnea(a["pts"], a["zs"], a["xs"], a["qd"], a["qdd"], a["body"], a["f"], a["m"], g),
    }


def per_call(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=3) / 3, 1e-9)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    a = inputs()
    py_cases, cy_cases = cases(py, a), cases(cy, a)
    print(f"{'kernel':<20}{'python [us]':>14}{'cython [us]':>14}{'speed-up':>10}")
    for name in py_cases:
        tp = per_call(py_cases[name], args.repeat)
        tc = per_call(cy_cases[name], args.repeat)
        print(f"{name:<20}{tp * 1e6:>14.2f}{tc * 1e6:>14.2f}{tp / tc:>10.1f}")
    tp = sum(per_call(f, args.repeat) for f in py_cases.values() if f is not py_cases["seg_seg_distance"])
    tc = sum(per_call(f, args.repeat) for f in cy_cases.values() if f is not cy_cases["seg_seg_distance"])
    print(f"{'chain-level total':<20}{tp * 1e6:>14.2f}{tc * 1e6:>14.2f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
