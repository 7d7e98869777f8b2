"""Box geometry kernels, compiled when available.

Set ``BDDLKIT_PURE_PYTHON=1`` to force the pure-Python implementation.
"""
import os

if os.environ.get("BDDLKIT_PURE_PYTHON"):
    from bddlkit import _geom_py as _impl
else:
    try:
        from bddlkit import _geom as _impl
    except ImportError:  # extension not built
        from bddlkit import _geom_py as _impl

BACKEND = "python" if _impl.__name__.endswith("_geom_py") else "cython"

ray_box = _impl.ray_box
ray_cast = _impl.ray_cast
boxes_overlap = _impl.boxes_overlap
first_overlap = _impl.first_overlap
box_distance = _impl.box_distance
point_box_distance = _impl.point_box_distance
point_in_box = _impl.point_in_box
count_in_box = _impl.count_in_box
indices_in_box = _impl.indices_in_box
indices_near_box = _impl.indices_near_box


def box_from_center(center, half):
    return (center[0] - half[0], center[1] - half[1], center[2] - half[2],
            center[0] + half[0], center[1] + half[1], center[2] + half[2])


def box_center(box):
    return ((box[0] + box[3]) / 2, (box[1] + box[4]) / 2, (box[2] + box[5]) / 2)


def box_diagonal(box):
    dx, dy, dz = box[3] - box[0], box[4] - box[1], box[5] - box[2]
    return (dx * dx + dy * dy + dz * dz) ** 0.5


def box_volume(box):
    return (box[3] - box[0]) * (box[4] - box[1]) * (box[5] - box[2])


def box_contains_box(outer, inner, tol=1e-9):
    return all(outer[k] - tol <= inner[k] and inner[k + 3] <= outer[k + 3] + tol
               for k in range(3))
