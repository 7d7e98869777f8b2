"""Predicate checking and sampling over the box world.

Arguments are world keys: object ids for objects and synsets for substance
systems.  ``check`` is read-only; ``sample`` mutates the world in place and
verifies its own post-condition before returning.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np

from bddlkit import geometry as geo
from bddlkit.kb import KnowledgeBase, applicable, applicable_as_object
from bddlkit.vocab import SIGNATURES, Signature, canonical_name
from bddlkit.world import (WorldState, break_object, points_box_distance, points_in_box,
                           slice_object)

SQRT_HALF = math.sqrt(0.5)
# ±x, ±y: the two orthogonal horizontal axes used by InsideOf.
AXIS_RAYS = ((1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, -1.0, 0.0))
# Eight horizontal rays at 45 degree steps; diagonals share one component value.
PLANE_RAYS = AXIS_RAYS + ((SQRT_HALF, SQRT_HALF, 0.0), (SQRT_HALF, -SQRT_HALF, 0.0),
                          (-SQRT_HALF, SQRT_HALF, 0.0), (-SQRT_HALF, -SQRT_HALF, 0.0))
DOWN = (0.0, 0.0, -1.0)
UP = (0.0, 0.0, 1.0)

# Predicates that stay meaningful on objects that are not (or no longer) real.
TOMBSTONE_OK = frozenset({"Real", "Future", "Sliced", "Broken"})


class PredicateError(ValueError):
    pass


class SamplingFailure(RuntimeError):
    def __init__(self, pred: str, args: Sequence[str], desired: bool, reason: str, attempts: int = 0):
        self.pred, self.args, self.desired = pred, tuple(args), desired
        self.reason, self.attempts = reason, attempts
        sign = "" if desired else "not "
        super().__init__(f"cannot sample {sign}{pred}({', '.join(args)}): {reason}")


@dataclass(frozen=True)
class PredicateSpec:
    name: str
    signature: Signature
    checker: Callable
    sampler: Optional[Callable] = None
    polarities: FrozenSet[bool] = frozenset()


# ---------------------------------------------------------------- helpers

def _center(world, key):
    return tuple(world.obj(key).position)


def _hits(world, origin, direction, exclude, target) -> bool:
    return any(h == target for h, _ in world.ray_query(origin, direction, exclude=[exclude]))


def _temp_param(world, key, name):
    return world.kb.param(world.obj(key).synset, name)


def _relevant(o):
    return [j for j in o.joints if j.relevant]


def _contained_count(world, container, substance) -> int:
    sys = world.substances.get(substance)
    if sys is None or not len(sys):
        return 0
    return int(np.count_nonzero(points_in_box(sys.positions, world.inner_box(container)) & sys.free_mask()))


def fill_fraction(world, container, substance) -> float:
    box = world.inner_box(container)
    vol = geo.box_volume(box)
    sys = world.substances.get(substance)
    vp = sys.particle_volume if sys is not None else world.physics.particle_volume
    return _contained_count(world, container, substance) * vp / vol if vol > 0 else 0.0


def covered_level(world, key, substance) -> int:
    """Owned particles for visual substances, contacting free particles otherwise."""
    sys = world.substances.get(substance)
    if sys is None or not len(sys):
        return 0
    if sys.kind == "visualSubstance":
        return sum(1 for w in sys.owners if w == key)
    near = points_box_distance(sys.positions, world.box(key)) <= world.physics.contact_eps
    return int(np.count_nonzero(near & sys.free_mask()))


def _agent_xy(world):
    return world.agent_position


def _dist2d(world, key):
    ax, ay = _agent_xy(world)
    c = world.obj(key).position
    return math.hypot(c[0] - ax, c[1] - ay)


# ---------------------------------------------------------------- checkers

def check_inside(world, a, b):
    c = _center(world, a)
    return all(_hits(world, c, d, a, b) for d in AXIS_RAYS)


def check_ontop(world, a, b):
    c = _center(world, a)
    return (_hits(world, c, DOWN, a, b) and not _hits(world, c, UP, a, b)
            and world.in_contact(a, b))


def check_under(world, a, b):
    c = _center(world, a)
    return _hits(world, c, UP, a, b) and not _hits(world, c, DOWN, a, b)


def check_nextto(world, a, b):
    c = _center(world, a)
    if not any(_hits(world, c, d, a, b) for d in PLANE_RAYS):
        return False
    ba, bb = world.box(a), world.box(b)
    avg = (geo.box_diagonal(ba) + geo.box_diagonal(bb)) / 2
    return geo.box_distance(ba, bb) < world.physics.k_next * avg


def check_contact(world, a, b):
    return world.in_contact(a, b)


def check_connected(world, a, b):
    return b in world.obj(a).connected_to or a in world.obj(b).connected_to


def check_open(world, a):
    return any(j.value > j.threshold for j in _relevant(world.obj(a)))


def check_closed(world, a):
    return not check_open(world, a)


def check_cooked(world, a):
    o = world.obj(a)
    cook = world.kb.param(o.synset, "cook_temperature")
    burnt = world.kb.param(o.synset, "burnt_temperature")
    return cook <= o.max_temperature and (burnt is None or o.max_temperature < burnt)


def check_burnt(world, a):
    o = world.obj(a)
    burnt = world.kb.param(o.synset, "burnt_temperature")
    return burnt is not None and o.max_temperature >= burnt


def check_frozen(world, a):
    return world.obj(a).temperature <= _temp_param(world, a, "frozen_temperature")


def check_heated(world, a):
    return world.obj(a).temperature >= _temp_param(world, a, "heated_temperature")


def check_onfire(world, a):
    return world.obj(a).temperature >= _temp_param(world, a, "onfire_temperature")


def check_boiled(world, s):
    sys = world.substances.get(s)
    if sys is None or not len(sys):
        return False
    return bool(np.all(sys.temperatures >= world.kb.param(s, "boiling_temperature")))


def check_toggled(world, a):
    return world.obj(a).toggled


def check_sliced(world, a):
    return world.obj(a).sliced


def check_broken(world, a):
    return world.obj(a).broken


def _spread(world, a):
    o = world.obj(a)
    if not o.keypoints or len(o.keypoints) < 2:
        raise PredicateError(f"{a} has no cloth keypoints")
    pts = np.asarray(o.keypoints, dtype=float)
    return max(float(np.linalg.norm(p - q)) for p, q in itertools.combinations(pts, 2))


def check_folded(world, a):
    o = world.obj(a)
    if o.fold_threshold is None:
        raise PredicateError(f"{a} has no fold threshold")
    return _spread(world, a) < o.fold_threshold


def check_unfolded(world, a):
    o = world.obj(a)
    if o.unfold_threshold is None:
        raise PredicateError(f"{a} has no unfold threshold")
    return _spread(world, a) > o.unfold_threshold


def check_assembled(world, a):
    pairs = world.obj(a).assembly
    return bool(pairs) and all(check_connected(world, p, q) for p, q in pairs)


def _touch(world, x, y) -> bool:
    eps = world.physics.contact_eps
    if x in world.objects and y in world.objects:
        return world.in_contact(x, y)
    if x in world.objects:
        x, y = y, x
    sx = world.substances[x]
    if y in world.objects:
        return bool(np.any(points_box_distance(sx.positions, world.box(y)) <= eps))
    sy = world.substances[y]
    if not len(sx) or not len(sy):
        return False
    d = np.linalg.norm(sx.positions[:, None, :] - sy.positions[None, :, :], axis=2)
    return bool(np.any(d <= eps))


def check_blended(world, *keys):
    return all(_touch(world, x, y) for x, y in itertools.combinations(keys, 2))


def check_soaked(world, a, s):
    o = world.obj(a)
    return o.soaked.get(s, 0.0) >= world.kb.param(o.synset, "soaked_threshold")


def check_filled(world, a, s):
    return fill_fraction(world, a, s) >= world.kb.param(world.obj(a).synset, "filled_threshold")


def check_empty(world, a, s):
    return _contained_count(world, a, s) == 0


def check_covered(world, a, s):
    return covered_level(world, a, s) >= world.kb.param(world.obj(a).synset, "covered_threshold")


def check_insource(world, a, s):
    return world.obj(a).insource == s


def check_reach(world, a):
    if world.agent.held == a:
        return True
    limit = world.kb.param(world.obj(world.agent.id).synset, "reach_distance")
    return _dist2d(world, a) <= limit


def check_fov(world, a):
    if world.agent.held == a:
        return True
    ax, ay = _agent_xy(world)
    c = world.obj(a).position
    dx, dy = c[0] - ax, c[1] - ay
    dist = math.hypot(dx, dy)
    if dist > world.physics.fov_range:
        return False
    if dist == 0.0:
        return True
    diff = math.atan2(dy, dx) - world.agent.heading
    diff = math.atan2(math.sin(diff), math.cos(diff))
    return abs(diff) <= world.physics.fov_half_angle + 1e-12


def check_same_room(world, a):
    room = world.room_of(a)
    return room is not None and room == world.room_of(world.agent.id)


def check_in_hand(world, a):
    return world.agent.held == a


def check_inroom(world, a, room_type):
    room = world.room_of(a)
    return room is not None and world.rooms[room].type == room_type


def is_real(world, key) -> bool:
    if key in world.objects:
        o = world.objects[key]
        return o.real and not o.removed
    sys = world.substances.get(key)
    return sys is not None and sys.real


def check_real(world, a):
    return is_real(world, a)


def check_future(world, a):
    return not is_real(world, a)


# ---------------------------------------------------------------- samplers

def _rng(world, rng):
    return rng if rng is not None else world.rng


def _place(world, rng, pred, a, ref, region, z, check, ignore=()):
    """Rejection-sample an (x, y) on ``region`` for object ``a`` at height ``z``."""
    o = world.obj(a)
    hx, hy, hz = o.half_extents
    x0, y0, x1, y1 = region[0] + hx, region[1] + hy, region[2] - hx, region[3] - hy
    n = world.physics.n_attempts
    if x0 > x1 or y0 > y1:
        raise SamplingFailure(pred, (a, ref), True, "support region smaller than object", 0)
    carried = world.dependents(a) if o.spatial else []
    skip = {a, ref, world.agent.id if a == world.agent.held else "", *carried, *ignore}
    home = list(o.position)
    was_parked = o.parked
    for attempt in range(1, n + 1):
        x = float(rng.uniform(x0, x1))
        y = float(rng.uniform(y0, y1))
        cand = geo.box_from_center((x, y, z), o.half_extents)
        if world.collides(cand, ignore=skip) is not None:
            continue
        o.parked = False
        world.move_object(a, (x, y, z))
        if check():
            return attempt
        world.move_object(a, home)
        o.parked = was_parked
        world.invalidate()
    raise SamplingFailure(pred, (a, ref), True, f"no valid placement in {n} attempts", n)


def _require_placed(world, pred, a, ref):
    if not world.obj(ref).spatial:
        raise SamplingFailure(pred, (a, ref), True, f"reference {ref} is not placed")


def sample_ontop(world, rng, desired, a, b):
    _require_placed(world, "OnTopOf", a, b)
    top = world.box(b)
    z = top[5] + world.obj(a).half_extents[2]
    return _place(world, rng, "OnTopOf", a, b, (top[0], top[1], top[3], top[4]), z,
                  lambda: check_ontop(world, a, b))


def sample_onfloor(world, rng, desired, a, b):
    _require_placed(world, "OnFloor", a, b)
    top = world.box(b)
    z = top[5] + world.obj(a).half_extents[2]
    return _place(world, rng, "OnFloor", a, b, (top[0], top[1], top[3], top[4]), z,
                  lambda: check_ontop(world, a, b))


def sample_inside(world, rng, desired, a, b):
    _require_placed(world, "InsideOf", a, b)
    inner = world.inner_box(b)
    hz = world.obj(a).half_extents[2]
    if 2 * hz > inner[5] - inner[2]:
        raise SamplingFailure("InsideOf", (a, b), True, "object taller than container", 0)
    z = inner[2] + hz
    return _place(world, rng, "InsideOf", a, b, (inner[0], inner[1], inner[3], inner[4]), z,
                  lambda: check_inside(world, a, b))


def sample_under(world, rng, desired, a, b):
    _require_placed(world, "Under", a, b)
    above = world.box(b)
    c = world.obj(b).position
    floor = next((f for f in world.floors() if world.box(f)[0] <= c[0] <= world.box(f)[3]
                  and world.box(f)[1] <= c[1] <= world.box(f)[4]), None)
    if floor is None:
        raise SamplingFailure("Under", (a, b), True, "no floor beneath reference", 0)
    fb = world.box(floor)
    if above[2] - fb[5] < 2 * world.obj(a).half_extents[2]:
        raise SamplingFailure("Under", (a, b), True, "no clearance beneath reference", 0)
    region = (max(above[0], fb[0]), max(above[1], fb[1]), min(above[3], fb[3]), min(above[4], fb[4]))
    z = fb[5] + world.obj(a).half_extents[2]
    return _place(world, rng, "Under", a, b, region, z, lambda: check_under(world, a, b), ignore=(floor,))


def sample_connected(world, rng, desired, a, b):
    world.obj(a).connected_to.add(b)
    world.obj(b).connected_to.add(a)
    return 1


def sample_open(world, rng, desired, a):
    joints = _relevant(world.obj(a))
    if not joints:
        raise SamplingFailure("Open", (a,), desired, "no relevant joints")
    if desired:
        mask = 0
        while not mask:
            mask = int(rng.integers(1, 2 ** len(joints)))
        for i, j in enumerate(joints):
            if mask >> i & 1:
                j.value = j.upper - (j.upper - j.threshold) * float(rng.random())
    else:
        for j in joints:
            j.value = j.lower + (j.threshold - j.lower) * float(rng.random())
    return 1


def sample_closed(world, rng, desired, a):
    return sample_open(world, rng, not desired, a)


def sample_cooked(world, rng, desired, a):
    o = world.obj(a)
    cook = world.kb.param(o.synset, "cook_temperature")
    burnt = world.kb.param(o.synset, "burnt_temperature")
    if desired:
        o.max_temperature = max(o.max_temperature, cook)
        if burnt is not None and o.max_temperature >= burnt:
            o.max_temperature = cook
    else:
        o.max_temperature = min(o.max_temperature, cook - 1)
    o.temperature = min(o.temperature, o.max_temperature)
    return 1


def sample_burnt(world, rng, desired, a):
    o = world.obj(a)
    burnt = world.kb.param(o.synset, "burnt_temperature")
    if burnt is None:
        if desired:
            raise SamplingFailure("Burnt", (a,), desired, "no burnt temperature for synset")
        return 1
    if desired:
        o.max_temperature = max(o.max_temperature, burnt)
    else:
        o.max_temperature = min(o.max_temperature, burnt - 1)
        o.temperature = min(o.temperature, o.max_temperature)
    return 1


def sample_frozen(world, rng, desired, a):
    o = world.obj(a)
    theta = world.kb.param(o.synset, "frozen_temperature")
    o.set_temperature(float(rng.uniform(theta - 50, theta - 10)) if desired else theta + 1)
    return 1


def _hot_sampler(name, param):
    def sampler(world, rng, desired, a):
        o = world.obj(a)
        theta = world.kb.param(o.synset, param)
        o.set_temperature(float(rng.uniform(theta + 10, theta + 50)) if desired else theta - 1)
        return 1
    sampler.__name__ = f"sample_{name.lower()}"
    return sampler


sample_heated = _hot_sampler("Heated", "heated_temperature")
sample_onfire = _hot_sampler("OnFire", "onfire_temperature")


def sample_boiled(world, rng, desired, s):
    sys = world.substances.get(s)
    if sys is None or not len(sys):
        if desired:
            raise SamplingFailure("Boiled", (s,), desired, "substance has no particles")
        return 1
    theta = world.kb.param(s, "boiling_temperature")
    if desired:
        sys.temperatures = rng.uniform(theta + 10, theta + 50, size=len(sys))
    else:
        sys.temperatures = np.full(len(sys), theta - 1.0)
    return 1


def sample_toggled(world, rng, desired, a):
    world.obj(a).toggled = bool(desired)
    return 1


def sample_sliced(world, rng, desired, a):
    o = world.obj(a)
    if desired:
        slice_object(world, a)
    elif o.sliced:
        raise SamplingFailure("Sliced", (a,), desired, "slicing is irreversible")
    return 1


def sample_broken(world, rng, desired, a):
    o = world.obj(a)
    if desired:
        break_object(world, a)
    elif o.broken:
        raise SamplingFailure("Broken", (a,), desired, "breaking is irreversible")
    return 1


def sample_soaked(world, rng, desired, a, s):
    o = world.obj(a)
    if desired:
        world.ensure_system(s).real = True
        o.soaked[s] = float(world.kb.param(o.synset, "soaked_threshold"))
    else:
        o.soaked.pop(s, None)
    return 1


def grid_points(box, n: int, spacing: float) -> np.ndarray:
    """``n`` points on a regular grid inside ``box``, filled bottom layer first."""
    s = spacing
    while True:
        dims = [max(int((box[k + 3] - box[k]) / s), 1) for k in range(3)]
        if dims[0] * dims[1] * dims[2] >= n or s < 1e-5:
            break
        s *= 0.8
    steps = [(box[k + 3] - box[k]) / dims[k] for k in range(3)]
    out = []
    for iz in range(dims[2]):
        for iy in range(dims[1]):
            for ix in range(dims[0]):
                if len(out) == n:
                    return np.asarray(out, dtype=float)
                out.append((box[0] + (ix + 0.5) * steps[0], box[1] + (iy + 0.5) * steps[1],
                            box[2] + (iz + 0.5) * steps[2]))
    return np.asarray(out, dtype=float).reshape(-1, 3)


def particles_for_fraction(fraction: float, volume: float, particle_volume: float) -> int:
    """Smallest count whose volume fraction, computed as the checker does, reaches ``fraction``."""
    n = max(math.ceil(fraction * volume / particle_volume - 1e-9), 0)
    while n * particle_volume / volume < fraction:
        n += 1
    return n


def _clear_contained(world, a, s):
    sys = world.substances.get(s)
    if sys is not None and len(sys):
        sys.delete(np.nonzero(points_in_box(sys.positions, world.inner_box(a)) & sys.free_mask())[0])


def sample_filled(world, rng, desired, a, s):
    if not desired:
        _clear_contained(world, a, s)
        return 1
    sys = world.ensure_system(s)
    sys.real = True
    box = world.inner_box(a)
    target = particles_for_fraction(world.kb.param(world.obj(a).synset, "filled_threshold"),
                                    geo.box_volume(box), sys.particle_volume)
    have = _contained_count(world, a, s)
    if target > have:
        pts = grid_points(box, target, sys.particle_volume ** (1 / 3))
        sys.add(pts[have:], world.physics.ambient)
    return 1


def sample_empty(world, rng, desired, a, s):
    return sample_filled(world, rng, not desired, a, s)


def sample_covered(world, rng, desired, a, s):
    sys = world.ensure_system(s)
    box = world.box(a)
    eps = world.physics.contact_eps
    if not desired:
        if sys.kind == "visualSubstance":
            sys.delete([i for i, w in enumerate(sys.owners) if w == a])
        else:
            near = points_box_distance(sys.positions, box) <= eps
            sys.delete(np.nonzero(near & sys.free_mask())[0])
        return 1
    sys.real = True
    need = int(world.kb.param(world.obj(a).synset, "covered_threshold")) - covered_level(world, a, s)
    if need <= 0:
        return 1
    xs = rng.uniform(box[0], box[3], size=need)
    ys = rng.uniform(box[1], box[4], size=need)
    start = box[5] + 0.5
    pts = []
    for x, y in zip(xs, ys):
        # Downward ray onto the object's own box gives the landing height.
        hit = geo.ray_cast((float(x), float(y), start), DOWN, [box])
        z = start - hit[0][1] if hit else box[5]
        pts.append((float(x), float(y), z if sys.kind == "visualSubstance" else z + eps / 2))
    sys.add(pts, world.physics.ambient, owner=a if sys.kind == "visualSubstance" else "")
    return 1


def sample_insource(world, rng, desired, a, s):
    world.obj(a).insource = s if desired else None
    if desired:
        world.ensure_system(s).real = True
    return 1


BOTH = frozenset({True, False})
TRUE_ONLY = frozenset({True})

REGISTRY: Dict[str, PredicateSpec] = {}


def _reg(name, checker, sampler=None, polarities=frozenset()):
    REGISTRY[name] = PredicateSpec(name, SIGNATURES[name], checker, sampler,
                                   frozenset(polarities) if sampler else frozenset())


_reg("InsideOf", check_inside, sample_inside, TRUE_ONLY)
_reg("OnTopOf", check_ontop, sample_ontop, TRUE_ONLY)
_reg("Under", check_under, sample_under, TRUE_ONLY)
_reg("OnFloor", check_ontop, sample_onfloor, TRUE_ONLY)
_reg("ConnectedWith", check_connected, sample_connected, TRUE_ONLY)
_reg("NextTo", check_nextto)
_reg("InContactWith", check_contact)
_reg("Hung", check_connected)
_reg("Open", check_open, sample_open, BOTH)
_reg("Closed", check_closed, sample_closed, BOTH)
_reg("Cooked", check_cooked, sample_cooked, BOTH)
_reg("Burnt", check_burnt, sample_burnt, BOTH)
_reg("Frozen", check_frozen, sample_frozen, BOTH)
_reg("Heated", check_heated, sample_heated, BOTH)
_reg("OnFire", check_onfire, sample_onfire, BOTH)
_reg("Boiled", check_boiled, sample_boiled, BOTH)
_reg("ToggledOn", check_toggled, sample_toggled, BOTH)
_reg("Sliced", check_sliced, sample_sliced, BOTH)
_reg("Broken", check_broken, sample_broken, BOTH)
_reg("Folded", check_folded)
_reg("Unfolded", check_unfolded)
_reg("Assembled", check_assembled)
_reg("Blended", check_blended)
_reg("Soaked", check_soaked, sample_soaked, BOTH)
_reg("Filled", check_filled, sample_filled, BOTH)
_reg("Empty", check_empty, sample_empty, BOTH)
_reg("Covered", check_covered, sample_covered, BOTH)
_reg("InSource", check_insource, sample_insource, BOTH)
_reg("InReachOfAgent", check_reach)
_reg("InSameRoomAsAgent", check_same_room)
_reg("InFoVOfAgent", check_fov)
_reg("InHandOfAgent", check_in_hand)
_reg("InRoom", check_inroom)
_reg("Real", check_real)
_reg("Future", check_future)

# Predicates with samplers, and the polarities each sampler supports.
TABLE_SAMPLEABLE: Dict[str, FrozenSet[bool]] = {
    name: REGISTRY[name].polarities
    for name in ("InsideOf", "OnTopOf", "Under", "OnFloor", "ConnectedWith", "Open", "Cooked",
                 "Burnt", "OnFire", "Frozen", "Heated", "Boiled", "Soaked", "Filled", "Covered",
                 "ToggledOn", "Sliced", "Broken")
}


# ---------------------------------------------------------------- entry points

def _unpack(atom) -> Tuple[str, Tuple[str, ...]]:
    if isinstance(atom, tuple) and len(atom) == 2 and isinstance(atom[0], str):
        pred, args = atom
    else:
        pred, args = atom.pred, atom.args
    canon = canonical_name(pred)
    if canon is None or canon not in REGISTRY:
        raise PredicateError(f"unknown predicate {pred!r}")
    return canon, tuple(args)


def _synset_of(world, key) -> str:
    if key in world.objects:
        return world.objects[key].synset
    if key in world.substances or world.kb.is_substance(key):
        return key
    raise PredicateError(f"unknown entity {key!r}")


def validate_atom(world: WorldState, kb: KnowledgeBase, pred: str, args: Sequence[str]) -> None:
    sig = SIGNATURES[pred]
    if not sig.arity_ok(len(args)):
        raise PredicateError(f"{pred} expects {len(sig.kinds)} arguments, got {len(args)}")
    for i, key in enumerate(args):
        if sig.kind_at(i) == "room":
            if not any(r.type == key for r in world.rooms.values()):
                raise PredicateError(f"unknown room type {key!r}")
            continue
        syn = _synset_of(world, key)
        if key in world.objects and kb.is_substance(syn):
            ok = applicable_as_object(kb, pred, syn, i)
        else:
            ok = applicable(kb, pred, syn, i)
        if not ok:
            raise PredicateError(f"{pred} inapplicable to {syn} (argument {i + 1})")


def check(world: WorldState, kb: KnowledgeBase, atom) -> bool:
    """Truth value of a ground atom (literal polarity is ignored)."""
    pred, args = _unpack(atom)
    validate_atom(world, kb, pred, args)
    if pred not in TOMBSTONE_OK:
        for i, key in enumerate(args):
            if SIGNATURES[pred].kind_at(i) == "room":
                continue
            if key in world.substances:
                continue
            if key in world.objects and not is_real(world, key):
                return False
            if key not in world.objects:
                return False
    return bool(REGISTRY[pred].checker(world, *args))


def holds(world: WorldState, kb: KnowledgeBase, literal) -> bool:
    """Whether a literal (atom plus polarity) is satisfied."""
    return check(world, kb, literal) == getattr(literal, "positive", True)


def sampleable(pred: str, desired: bool) -> bool:
    spec = REGISTRY.get(canonical_name(pred) or "")
    return spec is not None and desired in spec.polarities


def sample_counted(world: WorldState, kb: KnowledgeBase, atom, desired: bool = True, rng=None) -> int:
    """Like ``sample`` but returns the number of placement attempts used."""
    pred, args = _unpack(atom)
    validate_atom(world, kb, pred, args)
    spec = REGISTRY[pred]
    if desired not in spec.polarities:
        raise SamplingFailure(pred, args, desired, "polarity not sampleable")
    for key in args:
        if key in world.objects and not is_real(world, key) and pred not in TOMBSTONE_OK:
            raise SamplingFailure(pred, args, desired, f"{key} is not real")
    attempts = spec.sampler(world, _rng(world, rng), desired, *args)
    world.invalidate()
    if check(world, kb, (pred, args)) != desired:
        raise SamplingFailure(pred, args, desired, "post-condition failed", attempts or 0)
    return attempts or 1


def sample(world: WorldState, kb: KnowledgeBase, atom, desired: bool = True, rng=None) -> WorldState:
    """Mutate ``world`` so that ``check(world, kb, atom) == desired``.

    Raises SamplingFailure when placement fails or the polarity cannot be
    sampled.  Returns the same world object.
    """
    sample_counted(world, kb, atom, desired, rng)
    return world
