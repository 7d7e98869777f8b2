# cython: language_level=3
"""Compiled axis-aligned box kernels; mirrors ``_geom_py`` exactly."""
from libc.math cimport sqrt

cdef double INF = float("inf")


cdef inline double _ray_box(double ox, double oy, double oz,
                            double dx, double dy, double dz,
                            double x0, double y0, double z0,
                            double x1, double y1, double z1):
    cdef double lo = 0.0, hi = INF, t1, t2, tmp
    cdef double o[3]
    cdef double d[3]
    cdef double bmin[3]
    cdef double bmax[3]
    cdef int k
    o[0] = ox; o[1] = oy; o[2] = oz
    d[0] = dx; d[1] = dy; d[2] = dz
    bmin[0] = x0; bmin[1] = y0; bmin[2] = z0
    bmax[0] = x1; bmax[1] = y1; bmax[2] = z1
    for k in range(3):
        if d[k] == 0.0:
            if o[k] < bmin[k] or o[k] > bmax[k]:
                return -1.0
            continue
        t1 = (bmin[k] - o[k]) / d[k]
        t2 = (bmax[k] - o[k]) / d[k]
        if t1 > t2:
            tmp = t1; t1 = t2; t2 = tmp
        if t1 > lo:
            lo = t1
        if t2 < hi:
            hi = t2
        if lo > hi:
            return -1.0
    return lo


def ray_box(double ox, double oy, double oz, double dx, double dy, double dz, box):
    return _ray_box(ox, oy, oz, dx, dy, dz,
                    box[0], box[1], box[2], box[3], box[4], box[5])


def ray_cast(origin, direction, boxes):
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef double norm = sqrt(dx * dx + dy * dy + dz * dz)
    cdef double t
    cdef Py_ssize_t i
    hits = []
    for i, box in enumerate(boxes):
        t = _ray_box(ox, oy, oz, dx, dy, dz,
                     box[0], box[1], box[2], box[3], box[4], box[5])
        if t >= 0.0:
            hits.append((t * norm, i))
    hits.sort()
    return [(i, t) for t, i in hits]


cdef inline bint _overlap(double a0, double a1, double a2, double a3, double a4, double a5,
                          double b0, double b1, double b2, double b3, double b4, double b5,
                          double tol):
    if (a3 if a3 < b3 else b3) - (a0 if a0 > b0 else b0) <= tol:
        return False
    if (a4 if a4 < b4 else b4) - (a1 if a1 > b1 else b1) <= tol:
        return False
    if (a5 if a5 < b5 else b5) - (a2 if a2 > b2 else b2) <= tol:
        return False
    return True


def boxes_overlap(a, b, double tol):
    return _overlap(a[0], a[1], a[2], a[3], a[4], a[5],
                    b[0], b[1], b[2], b[3], b[4], b[5], tol)


def first_overlap(box, boxes, double tol):
    cdef double a0 = box[0], a1 = box[1], a2 = box[2], a3 = box[3], a4 = box[4], a5 = box[5]
    cdef Py_ssize_t i
    for i, b in enumerate(boxes):
        if _overlap(a0, a1, a2, a3, a4, a5, b[0], b[1], b[2], b[3], b[4], b[5], tol):
            return i
    return -1


def box_distance(a, b):
    cdef double s = 0.0, gap, lo, hi
    cdef int k
    for k in range(3):
        lo = a[k] if a[k] > b[k] else b[k]
        hi = a[k + 3] if a[k + 3] < b[k + 3] else b[k + 3]
        gap = lo - hi
        if gap > 0.0:
            s += gap * gap
    return sqrt(s)


cdef inline double _point_box_distance(double px, double py, double pz,
                                       double x0, double y0, double z0,
                                       double x1, double y1, double z1):
    cdef double s = 0.0, g
    if px < x0:
        g = x0 - px; s += g * g
    elif px > x1:
        g = px - x1; s += g * g
    if py < y0:
        g = y0 - py; s += g * g
    elif py > y1:
        g = py - y1; s += g * g
    if pz < z0:
        g = z0 - pz; s += g * g
    elif pz > z1:
        g = pz - z1; s += g * g
    return sqrt(s)


def point_box_distance(p, box):
    return _point_box_distance(p[0], p[1], p[2], box[0], box[1], box[2],
                               box[3], box[4], box[5])


def point_in_box(p, box):
    cdef double px = p[0], py = p[1], pz = p[2]
    return (box[0] <= px <= box[3] and box[1] <= py <= box[4]
            and box[2] <= pz <= box[5])


def count_in_box(points, box):
    cdef double x0 = box[0], y0 = box[1], z0 = box[2], x1 = box[3], y1 = box[4], z1 = box[5]
    cdef double px, py, pz
    cdef Py_ssize_t n = 0
    for p in points:
        px = p[0]; py = p[1]; pz = p[2]
        if x0 <= px <= x1 and y0 <= py <= y1 and z0 <= pz <= z1:
            n += 1
    return n


def indices_in_box(points, box):
    cdef double x0 = box[0], y0 = box[1], z0 = box[2], x1 = box[3], y1 = box[4], z1 = box[5]
    cdef double px, py, pz
    cdef Py_ssize_t i
    out = []
    for i, p in enumerate(points):
        px = p[0]; py = p[1]; pz = p[2]
        if x0 <= px <= x1 and y0 <= py <= y1 and z0 <= pz <= z1:
            out.append(i)
    return out


def indices_near_box(points, box, double eps):
    cdef double x0 = box[0], y0 = box[1], z0 = box[2], x1 = box[3], y1 = box[4], z1 = box[5]
    cdef Py_ssize_t i
    out = []
    for i, p in enumerate(points):
        if _point_box_distance(p[0], p[1], p[2], x0, y0, z0, x1, y1, z1) <= eps:
            out.append(i)
    return out
