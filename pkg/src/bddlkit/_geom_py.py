"""Pure-Python axis-aligned box kernels.

Boxes are 6-tuples ``(xmin, ymin, zmin, xmax, ymax, zmax)``.  Every function
here has a twin with the same signature in the compiled ``_geom`` module.
"""
import math

INF = float("inf")


def ray_box(ox, oy, oz, dx, dy, dz, box):
    """Entry parameter of the ray ``o + t*d`` (t >= 0) into a closed box, or -1."""
    lo = 0.0
    hi = INF
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for k in range(3):
        bmin = box[k]
        bmax = box[k + 3]
        if d[k] == 0.0:
            if o[k] < bmin or o[k] > bmax:
                return -1.0
            continue
        t1 = (bmin - o[k]) / d[k]
        t2 = (bmax - o[k]) / d[k]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > lo:
            lo = t1
        if t2 < hi:
            hi = t2
        if lo > hi:
            return -1.0
    return lo


def ray_cast(origin, direction, boxes):
    """Indices and hit distances of all boxes hit by a ray, nearest first."""
    ox, oy, oz = origin
    dx, dy, dz = direction
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    hits = []
    for i, box in enumerate(boxes):
        t = ray_box(ox, oy, oz, dx, dy, dz, box)
        if t >= 0.0:
            hits.append((t * norm, i))
    hits.sort()
    return [(i, t) for t, i in hits]


def boxes_overlap(a, b, tol):
    """True when the boxes interpenetrate by more than ``tol`` along every axis."""
    for k in range(3):
        if min(a[k + 3], b[k + 3]) - max(a[k], b[k]) <= tol:
            return False
    return True


def first_overlap(box, boxes, tol):
    for i, other in enumerate(boxes):
        if boxes_overlap(box, other, tol):
            return i
    return -1


def box_distance(a, b):
    """Euclidean distance between the closest points of two boxes (0 if touching)."""
    s = 0.0
    for k in range(3):
        gap = max(a[k], b[k]) - min(a[k + 3], b[k + 3])
        if gap > 0.0:
            s += gap * gap
    return math.sqrt(s)


def point_box_distance(p, box):
    s = 0.0
    for k in range(3):
        if p[k] < box[k]:
            g = box[k] - p[k]
            s += g * g
        elif p[k] > box[k + 3]:
            g = p[k] - box[k + 3]
            s += g * g
    return math.sqrt(s)


def point_in_box(p, box):
    return (box[0] <= p[0] <= box[3] and box[1] <= p[1] <= box[4]
            and box[2] <= p[2] <= box[5])


def count_in_box(points, box):
    n = 0
    for p in points:
        if point_in_box(p, box):
            n += 1
    return n


def indices_in_box(points, box):
    return [i for i, p in enumerate(points) if point_in_box(p, box)]


def indices_near_box(points, box, eps):
    return [i for i, p in enumerate(points) if point_box_distance(p, box) <= eps]
