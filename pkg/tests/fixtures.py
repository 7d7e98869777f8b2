"""Seeded fixtures shared by the unit and acceptance tests."""
import json

import numpy as np

from bddlkit import predicates as P
from bddlkit.engine import instantiate_activity, load_script, run_episode
from bddlkit.logic import And, Atom, Exists, ForAll, ForNPairs, Not, Or

import oracles as O

from conftest import data_path, obj, problem, room_world

KINEMATIC = ("InsideOf", "OnTopOf", "Under", "OnFloor", "ConnectedWith")

_SMALL = ("apple.n.01", "cup.n.01", "meatball.n.01", "sugar_cookie.n.01", "strawberry.n.01")
_SUPPORT = ("table.n.02", "countertop.n.01", "tray.n.01", "cookie_sheet.n.01")
_CONTAINER = ("bowl.n.01", "basket.n.01", "saucepan.n.01", "trash_can.n.01", "cabinet.n.01")

# (synset, substance) subjects per non-kinematic predicate.
_UNARY = {
    "Open": ("cabinet.n.01", "oven.n.01", "washer.n.03", "toaster_oven.n.01"),
    "Cooked": ("apple.n.01", "chicken_leg.n.01", "crab.n.05", "pie_dough.n.01"),
    "Burnt": ("chicken_leg.n.01", "crab.n.05"),
    "Frozen": ("apple.n.01", "ice.n.01", "cup.n.01"),
    "Heated": ("apple.n.01", "saucepan.n.01"),
    "OnFire": ("newspaper.n.03", "rag.n.01"),
    "ToggledOn": ("blender.n.01", "sink.n.01", "iron.n.04"),
    "Sliced": ("apple.n.01", "squash.n.02", "pumpkin.n.02"),
    "Broken": ("beer_bottle.n.01", "raw_egg.n.01"),
}
_BINARY = {
    "Soaked": (("rag.n.01", "towel.n.01", "scrub_brush.n.01"), ("water.n.06", "solvent.n.01")),
    "Filled": (("bowl.n.01", "cup.n.01", "saucepan.n.01"), ("water.n.06", "vinegar.n.01")),
    "Covered": (("table.n.02", "apple.n.01", "tray.n.01"), ("dust.n.01", "stain.n.01", "flour.n.01")),
}


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def sampling_case(kb, pred, desired, seed):
    """(world, atom) for one fixture; worlds are uncluttered single rooms."""
    rng = np.random.default_rng(seed)
    x, y = (float(v) for v in rng.uniform(1.5, 4.5, 2))
    if pred in KINEMATIC:
        a = _pick(rng, _SMALL)
        if pred == "InsideOf":
            # Only containers whose cavity is tall enough for the object.
            tall = kb.models[a]["half_extents"][2] * 2
            ref = _pick(rng, [c for c in _CONTAINER if kb.models[c]["container"]["half_extents"][2] * 2 >= tall])
        elif pred == "OnFloor":
            ref = None
        else:
            ref = _pick(rng, _SUPPORT)
        objs = [obj("a", a, 0.5, 5.5, kb.models[a]["half_extents"][2])]
        if ref is not None:
            # Solid boxes reach the floor, so Under needs a reference mounted above it.
            lift = float(rng.uniform(0.3, 0.8)) if pred == "Under" else 0.0
            objs.append(obj("ref", ref, x, y, kb.models[ref]["half_extents"][2] + lift))
        w = room_world(kb, objs, seed=seed)
        if ref is not None and kb.models[ref].get("joints"):
            w.obj("ref").joints[0].value = w.obj("ref").joints[0].upper
        return w, (pred, ("a", "ref" if ref else w.floors()[0]))
    if pred in _UNARY:
        syn = _pick(rng, _UNARY[pred])
        w = room_world(kb, [obj("a", syn, x, y, kb.models[syn]["half_extents"][2])], seed=seed)
        atom = (pred, ("a",))
        if not desired and pred not in ("Sliced", "Broken") and rng.random() < 0.5:
            P.sample(w, kb, atom, True)
        return w, atom
    if pred == "Boiled":
        w = room_world(kb, [obj("pot", "saucepan.n.01", x, y, 0.08)], seed=seed)
        P.sample(w, kb, ("Filled", ("pot", "water.n.06")), True)
        return w, (pred, ("water.n.06",))
    subjects, substances = _BINARY[pred]
    syn, sub = _pick(rng, subjects), _pick(rng, substances)
    w = room_world(kb, [obj("a", syn, x, y, kb.models[syn]["half_extents"][2])], seed=seed)
    atom = (pred, ("a", sub))
    if not desired and rng.random() < 0.5:
        P.sample(w, kb, atom, True)
    return w, atom


def sampleable_pairs():
    return sorted((p, d) for p, pols in P.TABLE_SAMPLEABLE.items() for d in pols)


def run_case(kb, pred, desired, seed):
    """'ok', 'fail' (sampler gave up) or 'inconsistent'."""
    w, atom = sampling_case(kb, pred, desired, seed)
    try:
        P.sample(w, kb, atom, desired)
    except P.SamplingFailure:
        return "fail"
    # Re-check on a reloaded copy so nothing cached by the sampler can leak into the answer.
    fresh = w.copy()
    fresh.invalidate()
    return "ok" if P.check(fresh, kb, atom) == desired else "inconsistent"


# ---------------------------------------------------------------- random box worlds

def random_boxes(rng):
    """2-6 boxes, many of them stacked on, hung under or sunk into an earlier one."""
    boxes = []
    for _ in range(int(rng.integers(2, 7))):
        h = rng.uniform(0.05, 0.5, 3)
        mode = int(rng.integers(0, 4)) if boxes else 0
        if mode == 0:
            c = np.r_[rng.uniform(1, 5, 2), rng.uniform(0, 2)]
        else:
            p = boxes[int(rng.integers(len(boxes)))]
            pc, ph = (p[:3] + p[3:]) / 2, (p[3:] - p[:3]) / 2
            xy = pc[:2] + rng.uniform(-1.2, 1.2, 2) * ph[:2]
            z = {1: p[5] + h[2], 2: p[2] - h[2], 3: pc[2] + rng.uniform(-1, 1) * ph[2]}[mode]
            c = np.r_[xy, z]
        boxes.append(np.r_[c - h, c + h])
    return boxes


def box_world(kb, boxes):
    docs = [obj(f"b{i}", "apple.n.01", *((b[:3] + b[3:]) / 2), half_extents=list((b[3:] - b[:3]) / 2))
            for i, b in enumerate(boxes)]
    return room_world(kb, docs)


def kinematic_disagreements(kb, seed):
    """Pairs where a kinematic checker and the interval oracle differ in one random world."""
    w = box_world(kb, random_boxes(np.random.default_rng(seed)))
    ids = [k for k in w.objects if k.startswith("b")]
    bx = {k: w.box(k) for k in ids}
    eps, k_next = w.physics.contact_eps, w.physics.k_next
    bad, positives = [], 0
    for a in ids:
        for b in ids:
            if a == b:
                continue
            want = {"InsideOf": O.oracle_inside(bx[a], bx[b]),
                    "OnTopOf": O.oracle_ontop(bx[a], bx[b], eps),
                    "Under": O.oracle_under(bx[a], bx[b]),
                    "NextTo": O.oracle_nextto(bx[a], bx[b], k_next)}
            for pred, v in want.items():
                positives += v
                if P.check(w, kb, (pred, (a, b))) != v:
                    bad.append((seed, pred, a, b, v))
    return bad, positives


# ---------------------------------------------------------------- random goals over abstract worlds

GOAL_SYNSETS = ("a.n.01", "b.n.01", "c.n.01")


class AbstractWorld:
    """Entities per synset and a random truth table for unary p and binary r."""

    def __init__(self, rng, max_per_synset=6):
        self.domains = {s: tuple(f"{s[0]}{i}" for i in range(int(rng.integers(0, max_per_synset + 1))))
                        for s in GOAL_SYNSETS}
        ents = [e for d in self.domains.values() for e in d] + ["k0"]
        bias = float(rng.uniform(0.2, 0.8))
        self.table = {("p", (e,)): bool(rng.random() < bias) for e in ents}
        self.table.update({("r", (e, f)): bool(rng.random() < bias) for e in ents for f in ents})

    def atom(self, pred, args):
        return self.table[(pred, tuple(args))]

    def domain(self, synset):
        return list(self.domains[synset])


def random_goal(rng, depth=3, scope=()):
    """A negation-normal goal using variables from ``scope`` or the constant k0."""
    def term():
        if scope and rng.random() < 0.85:
            return scope[int(rng.integers(len(scope)))]
        return "k0"

    kind = int(rng.integers(0, 7)) if depth > 0 else int(rng.integers(0, 2))
    if kind == 0:
        return Atom("p", (term(),))
    if kind == 1:
        a = Atom("r", (term(), term()))
        return Not(a) if rng.random() < 0.3 else a
    if kind in (2, 3):
        kids = tuple(random_goal(rng, depth - 1, scope) for _ in range(int(rng.integers(0, 4)) if rng.random() < 0.1 else int(rng.integers(1, 4))))
        return And(kids) if kind == 2 else Or(kids)
    syn = GOAL_SYNSETS[int(rng.integers(len(GOAL_SYNSETS)))]
    v = f"?v{len(scope)}"
    if kind == 4:
        return ForAll(v, syn, random_goal(rng, depth - 1, scope + (v,)))
    if kind == 5:
        return Exists(v, syn, random_goal(rng, depth - 1, scope + (v,)))
    syn2 = GOAL_SYNSETS[int(rng.integers(len(GOAL_SYNSETS)))]
    w = f"?w{len(scope)}"
    body = Atom("r", (v, w)) if rng.random() < 0.7 else random_goal(rng, depth - 1, scope + (v, w))
    return ForNPairs(int(rng.integers(1, 4)), v, syn, w, syn2, body)


# ---------------------------------------------------------------- scripted episodes

def scripted_setup(kb, name, seed=0):
    """(defn, world, grounding, primitives) for a shipped script."""
    script = load_script(data_path("scripts", name + ".json"))
    with open(data_path("scripts", name + ".json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    defn = problem(meta["problem"], kb)
    world, g = instantiate_activity(defn, data_path("scenes", meta["scene"] + ".json"), kb, seed=seed)
    return defn, world, g, script


def scripted_episode(kb, name, edit=None, seed=0):
    defn, world, g, script = scripted_setup(kb, name, seed)
    if edit is not None:
        script = edit(script)
    return run_episode(world, g, defn, script)
