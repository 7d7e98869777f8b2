import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bddlkit import _geom_py, geometry

try:
    from bddlkit import _geom as _geom_c
except ImportError:  # pragma: no cover - extension not built
    _geom_c = None

BACKENDS = [pytest.param(_geom_py, id="python"),
            pytest.param(_geom_c, id="cython",
                         marks=pytest.mark.skipif(_geom_c is None, reason="extension not built"))]

coord = st.floats(-5, 5, allow_nan=False, width=32)
size = st.floats(0.0625, 3, allow_nan=False, width=32)


@st.composite
def boxes(draw):
    c = [draw(coord) for _ in range(3)]
    h = [draw(size) for _ in range(3)]
    return geometry.box_from_center(c, h)


points = st.tuples(coord, coord, coord)


def ray_box_oracle(o, d, box, samples=20001, tmax=20.0):
    """Brute force: march along the ray and return the first sample inside the box."""
    t = np.linspace(0, tmax, samples)
    p = np.asarray(o, float)[None, :] + t[:, None] * np.asarray(d, float)[None, :]
    lo, hi = np.asarray(box[:3]), np.asarray(box[3:])
    inside = np.all((p >= lo - 1e-9) & (p <= hi + 1e-9), axis=1)
    hit = np.nonzero(inside)[0]
    return float(t[hit[0]]) if len(hit) else -1.0


def test_backend_selected():
    assert geometry.BACKEND in ("python", "cython")


@pytest.mark.parametrize("impl", BACKENDS)
def test_ray_box_axis(impl):
    box = (1, -1, -1, 2, 1, 1)
    assert impl.ray_box(0, 0, 0, 1, 0, 0, box) == pytest.approx(1.0)
    assert impl.ray_box(0, 0, 0, -1, 0, 0, box) == -1.0
    assert impl.ray_box(1.5, 0, 0, 1, 0, 0, box) == 0.0  # origin inside
    assert impl.ray_box(0, 2, 0, 1, 0, 0, box) == -1.0  # parallel, outside slab


@pytest.mark.parametrize("impl", BACKENDS)
@settings(max_examples=60, deadline=None)
@given(o=points, d=st.sampled_from([(1, 0, 0), (0, -1, 0), (0, 0, 1), (0.6, 0.8, 0)]), box=boxes())
def test_ray_box_matches_marching(impl, o, d, box):
    t = impl.ray_box(*o, *d, box)
    ref = ray_box_oracle(o, d, box)
    step = 20.0 / 20000
    if t >= 0:
        p = [o[k] + t * d[k] for k in range(3)]
        assert all(box[k] - 1e-5 <= p[k] <= box[k + 3] + 1e-5 for k in range(3))
    if 0 <= ref:
        assert 0 <= t <= ref + 1e-9
        assert ref - t <= step + 1e-9
    elif t >= 0:
        assert t > 20 - step  # entry beyond the marched segment


@pytest.mark.parametrize("impl", BACKENDS)
def test_ray_cast_sorted(impl):
    bxs = [(3, -1, -1, 4, 1, 1), (1, -1, -1, 2, 1, 1), (0, 5, 0, 1, 6, 1)]
    hits = impl.ray_cast((0, 0, 0), (2, 0, 0), bxs)
    assert [i for i, _ in hits] == [1, 0]
    assert hits[0][1] == pytest.approx(1.0)  # distance, not ray parameter
    assert hits[1][1] == pytest.approx(3.0)


@pytest.mark.parametrize("impl", BACKENDS)
@settings(max_examples=100, deadline=None)
@given(a=boxes(), b=boxes())
def test_overlap_and_distance(impl, a, b):
    inter = [min(a[k + 3], b[k + 3]) - max(a[k], b[k]) for k in range(3)]
    assert impl.boxes_overlap(a, b, 0.0) == all(x > 0 for x in inter)
    gaps = [max(0.0, -x) for x in inter]
    assert impl.box_distance(a, b) == pytest.approx(math.sqrt(sum(g * g for g in gaps)), abs=1e-9)
    assert impl.box_distance(a, b) == pytest.approx(impl.box_distance(b, a))


@pytest.mark.parametrize("impl", BACKENDS)
@settings(max_examples=100, deadline=None)
@given(p=points, box=boxes())
def test_point_queries(impl, p, box):
    inside = all(box[k] <= p[k] <= box[k + 3] for k in range(3))
    assert impl.point_in_box(p, box) == inside
    d = impl.point_box_distance(p, box)
    assert (d == 0) == inside
    clamp = [min(max(p[k], box[k]), box[k + 3]) for k in range(3)]
    assert d == pytest.approx(math.dist(p, clamp), abs=1e-9)


@pytest.mark.parametrize("impl", BACKENDS)
def test_point_sets(impl):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, (500, 3))
    box = (-1, -0.5, -1, 1, 0.5, 0.2)
    ref = [i for i, p in enumerate(pts) if all(box[k] <= p[k] <= box[k + 3] for k in range(3))]
    assert impl.indices_in_box(pts, box) == ref
    assert impl.count_in_box(pts, box) == len(ref)
    near = impl.indices_near_box(pts, box, 0.1)
    assert set(ref) <= set(near)
    assert impl.first_overlap(box, [(5, 5, 5, 6, 6, 6), (0, 0, 0, 1, 1, 1)], 0.0) == 1
    assert impl.first_overlap(box, [(5, 5, 5, 6, 6, 6)], 0.0) == -1


@pytest.mark.skipif(_geom_c is None, reason="extension not built")
@settings(max_examples=150, deadline=None)
@given(o=points, d=st.tuples(coord, coord, coord), bxs=st.lists(boxes(), max_size=6), p=points)
def test_backends_agree(o, d, bxs, p):
    if not any(d):
        d = (1.0, 0.0, 0.0)
    a = _geom_py.ray_cast(o, d, bxs)
    b = _geom_c.ray_cast(o, d, bxs)
    assert [i for i, _ in a] == [i for i, _ in b]
    assert [t for _, t in a] == pytest.approx([t for _, t in b])
    for box in bxs:
        assert _geom_py.point_box_distance(p, box) == pytest.approx(_geom_c.point_box_distance(p, box))
        assert _geom_py.point_in_box(p, box) == _geom_c.point_in_box(p, box)
        for other in bxs:
            assert _geom_py.boxes_overlap(box, other, 1e-6) == _geom_c.boxes_overlap(box, other, 1e-6)


def test_helpers():
    b = geometry.box_from_center((1, 2, 3), (0.5, 1, 1.5))
    assert b == (0.5, 1, 1.5, 1.5, 3, 4.5)
    assert geometry.box_center(b) == (1, 2, 3)
    assert geometry.box_volume(b) == pytest.approx(6.0)
    assert geometry.box_diagonal(b) == pytest.approx(math.sqrt(1 + 4 + 9))
    assert geometry.box_contains_box(b, geometry.box_from_center((1, 2, 3), (0.1, 0.1, 0.1)))
    assert not geometry.box_contains_box(b, geometry.box_from_center((1.45, 2, 3), (0.1, 0.1, 0.1)))
