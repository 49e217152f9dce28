"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
module is used.  Set ``MODSYNTH_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("MODSYNTH_PURE_PYTHON", "") not in ("", "0"):
    from modsynth import _kernels_py as _impl
else:
    try:
        from modsynth import _kernels as _impl
    except ImportError:  # extension not built
        from modsynth import _kernels_py as _impl

BACKEND = _impl.BACKEND
seg_seg_distance = _impl.seg_seg_distance
seg_point_distance = _impl.seg_point_distance
chain = _impl.chain
jacobian = _impl.jacobian
sphere_clearances = _impl.sphere_clearances
self_pairs = _impl.self_pairs
self_distances = _impl.self_distances
wall_terms = _impl.wall_terms
rnea = _impl.rnea
