"""Activity instantiation, symbolic action primitives, goal evaluation and metrics."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bddlkit import geometry as geo
from bddlkit import predicates as P
from bddlkit.goals import Evaluator
from bddlkit.kb import KnowledgeBase
from bddlkit.logic import Formula, normalize
from bddlkit.parser import ActivityDefinition, GroundLiteral
from bddlkit.transitions import CleaningError, apply_cleaning
from bddlkit.vocab import SIGNATURES
from bddlkit.world import WorldState, load_scene, scene_instances

log = logging.getLogger(__name__)

REPORT_SCHEMA = "bddlkit.report/1"
SCRIPT_SCHEMA = "bddlkit.script/1"
V_BASE = 0.5  # m/s
MANIPULATION_TIME = 3.0  # s per manipulation primitive
STAND_OFF = 0.6  # m beyond the target's box edge
N_BEARINGS = 16
LOCAL_FAILURES = 10
DEFAULT_BUDGET = 100
DEFAULT_DT = 1.0 / 60.0

KINEMATIC = ("InsideOf", "OnTopOf", "OnFloor", "Under", "ConnectedWith", "NextTo",
             "InContactWith", "Hung")
SUBSTANCE = ("Filled", "Empty", "Covered", "Soaked", "InSource")


class InstantiationError(RuntimeError):
    def __init__(self, message: str, literal: Optional[str] = None, attempts: int = 0):
        super().__init__(message)
        self.literal = literal
        self.attempts = attempts


@dataclass
class Grounding:
    objects: Dict[str, str] = field(default_factory=dict)  # instance -> world key
    rooms: Dict[str, str] = field(default_factory=dict)  # instance -> room id
    attempts: Dict[str, int] = field(default_factory=dict)  # literal -> sampling attempts
    restarts: int = 0

    def key(self, term: str) -> str:
        return self.objects.get(term, term)

    def as_dict(self) -> dict:
        return {"objects": dict(sorted(self.objects.items())),
                "rooms": dict(sorted(self.rooms.items())),
                "attempts": dict(sorted(self.attempts.items())), "restarts": self.restarts}

    @classmethod
    def from_dict(cls, doc: dict) -> "Grounding":
        return cls(dict(doc.get("objects", {})), dict(doc.get("rooms", {})),
                   dict(doc.get("attempts", {})), int(doc.get("restarts", 0)))


def literal_text(lit: GroundLiteral) -> str:
    atom = f"({lit.pred} {' '.join(lit.args)})"
    return atom if lit.positive else f"(not {atom})"


# ---------------------------------------------------------------- instantiation

class _Attempt:
    """One instantiation pass over a freshly loaded scene."""

    def __init__(self, defn, scene_doc, kb, seed):
        self.defn, self.kb = defn, kb
        self.world = load_scene(scene_doc, kb, seed=seed)
        self.g = Grounding()
        self.prebound = scene_instances(scene_doc)
        self.local_failures = 0

    @property
    def rng(self):
        return self.world.rng

    def fail_local(self, lit, exc):
        self.local_failures += 1
        if self.local_failures >= LOCAL_FAILURES:
            raise InstantiationError(str(exc), literal_text(lit))

    def args(self, lit: GroundLiteral) -> Tuple[str, ...]:
        sig = SIGNATURES[lit.pred]
        return tuple(a if sig.kind_at(i) == "room" else self.g.key(a) for i, a in enumerate(lit.args))

    def substance(self, syn: str) -> bool:
        return not self.defn.legacy and self.kb.is_substance(syn)

    def bind(self) -> None:
        w, kb, defn = self.world, self.kb, self.defn
        futures = set(defn.future_instances)
        taken = set()
        for inst, syn in defn.all_objects:
            if kb.is_a(syn, "agent.n.01"):
                self.g.objects[inst] = w.agent.id
                taken.add(w.agent.id)
            elif inst in self.prebound:
                oid = self.prebound[inst]
                if oid not in w.objects or not kb.is_a(w.objects[oid].synset, syn):
                    raise InstantiationError(f"scene object {oid} cannot stand for {inst}")
                self.g.objects[inst] = oid
                taken.add(oid)
            elif self.substance(syn):
                sys = w.ensure_system(syn)
                if inst in futures:
                    sys.real = False
                self.g.objects[inst] = syn
        for lit in defn.init:
            if lit.pred != "InRoom" or not lit.positive:
                continue
            inst, rtype = lit.args
            rooms = sorted(r.id for r in w.rooms.values() if r.type == rtype)
            if not rooms:
                raise InstantiationError(f"scene has no room of type {rtype}", literal_text(lit))
            if inst in self.g.objects:
                continue
            syn = defn.synset_of(inst)
            hit = next((oid for oid in w.spatial_ids([w.agent.id])
                        if oid not in taken and kb.is_a(w.objects[oid].synset, syn)
                        and w.room_of(oid) in rooms), None)
            if hit is not None:
                self.g.objects[inst] = hit
                self.g.rooms[inst] = w.room_of(hit)
                taken.add(hit)
        for inst, syn in defn.all_objects:
            if inst in self.g.objects:
                continue
            leaves = kb.leaves_under(syn)
            leaf = leaves[int(self.rng.integers(len(leaves)))] if len(leaves) > 1 else leaves[0]
            oid = inst if inst not in w.objects else w.new_id(leaf)
            o = w.create_object(oid, leaf, parked=True)
            if inst in futures:
                o.real = False
            self.g.objects[inst] = oid

    def place_fixture(self, lit: GroundLiteral) -> None:
        """Fresh objects required in a room go onto that room's floor."""
        w = self.world
        inst, rtype = lit.args
        oid = self.g.objects[inst]
        if w.objects[oid].spatial:
            return
        floors = [f for f in w.floors() if w.rooms[w.room_of(f)].type == rtype]
        self.g.rooms[inst] = w.room_of(floors[0])
        self.sample(lit, ("OnFloor", (oid, floors[int(self.rng.integers(len(floors)))])), True)

    def sample(self, lit, atom, desired) -> None:
        while True:
            try:
                n = P.sample_counted(self.world, self.kb, atom, desired, self.rng)
                self.count(lit, n)
                return
            except P.SamplingFailure as exc:
                self.count(lit, max(exc.attempts, 1))
                self.fail_local(lit, exc)

    def count(self, lit, n) -> None:
        k = literal_text(lit)
        self.g.attempts[k] = self.g.attempts.get(k, 0) + n

    def place_on_floor(self, oid: str, lit=None) -> None:
        floors = self.world.floors()
        if not floors:
            raise InstantiationError(f"no floor to put {oid} on")
        f = floors[int(self.rng.integers(len(floors)))]
        fake = lit or GroundLiteral("OnFloor", (oid, f), True)
        self.sample(fake, ("OnFloor", (oid, f)), True)

    def kinematics(self) -> None:
        w = self.world
        pending = [l for l in self.defn.init
                   if l.positive and l.pred in KINEMATIC and P.sampleable(l.pred, True)]
        movers = {self.args(l)[0] for l in pending if l.pred != "ConnectedWith"}
        while pending:
            ready = None
            for lit in pending:
                a, b = self.args(lit)
                if lit.pred == "ConnectedWith" or w.objects[b].spatial:
                    ready = lit
                    break
            if ready is None:
                # Place a reference that nothing else positions, then retry.
                lit = next((l for l in pending if self.args(l)[1] not in movers), None)
                if lit is None:
                    raise InstantiationError("cyclic placement constraints", literal_text(pending[0]))
                self.place_on_floor(self.args(lit)[1])
                continue
            pending.remove(ready)
            atom = (ready.pred, self.args(ready))
            if w.objects[atom[1][0]].spatial and P.check(w, self.kb, atom):
                continue
            self.sample(ready, atom, True)

    def leftovers(self) -> None:
        w = self.world
        for inst, _ in self.defn.all_objects:
            oid = self.g.objects[inst]
            o = w.objects.get(oid)
            if o is not None and o.real and o.parked:
                self.place_on_floor(oid)

    def states(self, group) -> None:
        for lit in self.defn.init:
            if lit.pred in ("InRoom", "Future", "Real") or lit.pred in KINEMATIC:
                continue
            if (lit.pred in SUBSTANCE) != (group == "substance"):
                continue
            atom = (lit.pred, self.args(lit))
            if P.check(self.world, self.kb, atom) == lit.positive:
                continue
            if not P.sampleable(lit.pred, lit.positive):
                continue
            self.sample(lit, atom, lit.positive)

    def recheck(self) -> Optional[GroundLiteral]:
        for lit in self.defn.init:
            atom = (lit.pred, self.args(lit))
            if P.check(self.world, self.kb, atom) != lit.positive:
                return lit
        return None

    def run(self) -> Tuple[WorldState, Grounding]:
        self.bind()
        for lit in self.defn.init:
            if lit.pred == "InRoom" and lit.positive:
                self.place_fixture(lit)
        self.kinematics()
        self.leftovers()
        self.states("substance")
        self.states("state")
        bad = self.recheck()
        if bad is not None:
            raise InstantiationError(f"init literal {literal_text(bad)} does not hold", literal_text(bad))
        self.world.invalidate()
        return self.world, self.g


def _scene_doc(scene):
    if isinstance(scene, WorldState):
        return scene.snapshot()
    if isinstance(scene, str):
        with open(scene, encoding="utf-8") as fh:
            return json.load(fh)
    return scene


def instantiate_activity(defn: ActivityDefinition, scene, kb: KnowledgeBase, seed: int = 0,
                         budget: int = DEFAULT_BUDGET) -> Tuple[WorldState, Grounding]:
    """Bind instances to scene objects and sample the init literals.

    Restarts from the pristine scene after too many local sampling failures,
    up to ``budget`` restarts.
    """
    doc = _scene_doc(scene)
    master = np.random.default_rng(seed)
    attempts: Dict[str, int] = {}
    last: Optional[InstantiationError] = None
    for restart in range(budget + 1):
        run = _Attempt(defn, doc, kb, int(master.integers(2 ** 63)))
        try:
            world, g = run.run()
        except InstantiationError as exc:
            for k, v in run.g.attempts.items():
                attempts[k] = attempts.get(k, 0) + v
            if exc.literal is None or "no room of type" in str(exc):
                raise
            last = exc
            continue
        for k, v in attempts.items():
            g.attempts[k] = g.attempts.get(k, 0) + v
        g.restarts = restart
        return world, g
    raise InstantiationError(f"unsatisfiable within budget: {last}", last.literal if last else None,
                             sum(attempts.values()))


# ---------------------------------------------------------------- primitives

PRIMITIVES = ("navigate", "pick", "place", "push", "dip", "wipe")


@dataclass
class Primitive:
    kind: str
    target: str
    relation: Optional[str] = None  # place: ontop | inside
    direction: str = "open"  # push: open | close

    def __post_init__(self):
        if self.kind not in PRIMITIVES:
            raise ValueError(f"unknown primitive {self.kind!r}")
        if self.kind == "place" and self.relation not in ("ontop", "inside"):
            raise ValueError("place needs relation 'ontop' or 'inside'")
        if self.kind == "push" and self.direction not in ("open", "close"):
            raise ValueError("push direction must be 'open' or 'close'")

    @classmethod
    def from_dict(cls, doc: dict) -> "Primitive":
        return cls(doc["kind"], doc["target"], doc.get("relation"), doc.get("direction", "open"))

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "target": self.target}
        if self.relation is not None:
            d["relation"] = self.relation
        if self.kind == "push":
            d["direction"] = self.direction
        return d


def load_script(doc) -> List[Primitive]:
    if isinstance(doc, str):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    steps = doc["primitives"] if isinstance(doc, dict) else doc
    return [Primitive.from_dict(s) for s in steps]


@dataclass
class Outcome:
    ok: bool
    message: str = ""
    dist_nav: float = 0.0
    sim_time: float = 0.0
    moved: Dict[str, List[List[float]]] = field(default_factory=dict)  # id -> [before, after]
    joints: List[list] = field(default_factory=list)  # [obj, joint, kind, radius, before, after]

    @property
    def kin_dis(self) -> float:
        return _kin_dis(self.moved, self.joints)


def _kin_dis(moved, joints) -> float:
    total = 0.0
    for oid in sorted(moved):
        before, after = moved[oid]
        total += math.dist(before, after)
    for _, _, kind, radius, before, after in joints:
        d = abs(after - before)
        total += d if kind == "prismatic" else d * radius
    return total


def _kinematic_state(world: WorldState):
    pos = {i: tuple(o.position) for i, o in world.objects.items() if o.spatial}
    joints = {(i, j.name): (j.kind, j.radius, j.value) for i, o in world.objects.items()
              for j in o.joints if o.spatial}
    return pos, joints


def _fail(msg: str) -> Outcome:
    return Outcome(False, msg)


class _Executor:
    def __init__(self, world: WorldState, grounding: Optional[Grounding]):
        self.w = world
        self.kb = world.kb
        self.g = grounding or Grounding()

    def resolve(self, term: str) -> Optional[str]:
        key = self.g.key(term)
        return key if key in self.w.objects else None

    def check(self, pred, *args) -> bool:
        return P.check(self.w, self.kb, (pred, args))

    def navigate(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        box = w.box(t)
        c = w.obj(t).position
        body = w.obj(w.agent.id)
        ax, ay = w.agent_position
        best = None
        for k in range(N_BEARINGS):
            th = 2 * math.pi * k / N_BEARINGS
            dx, dy = math.cos(th), math.sin(th)
            exits = [h / abs(d) for h, d in ((box[3] - c[0], dx), (box[4] - c[1], dy)) if abs(d) > 1e-12]
            r = min(exits) + STAND_OFF
            x, y = c[0] + dx * r, c[1] + dy * r
            if w.room_of_point(x, y) is None:
                continue
            cand = geo.box_from_center((x, y, body.position[2]), body.half_extents)
            if w.collides(cand, ignore=[w.agent.id]) is not None:
                continue
            d = math.hypot(x - ax, y - ay)
            if best is None or d < best[0] - 1e-12:
                best = (d, x, y)
        if best is None:
            return _fail("no collision-free standing point")
        d, x, y = best
        w.move_object(w.agent.id, (x, y, body.position[2]), carry=False)
        if w.agent.held:
            w.move_object(w.agent.held, w.hold_position(w.agent.held))
        w.agent.heading = math.atan2(c[1] - y, c[0] - x)
        return Outcome(True, "", dist_nav=d, sim_time=d / V_BASE)

    def pick(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        if w.agent.held is not None:
            return _fail("hand occupied")
        o = w.obj(t)
        if t == w.agent.id or o.fixed or o.synset == "floor.n.01":
            return _fail(f"{p.target} cannot be picked")
        if not self.check("InReachOfAgent", t):
            return _fail(f"{p.target} out of reach")
        if not self.check("InFoVOfAgent", t):
            return _fail(f"{p.target} not in view")
        w.agent.held = t
        w.move_object(t, w.hold_position(t))
        return Outcome(True, sim_time=MANIPULATION_TIME)

    def place(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        held = w.agent.held
        if held is None:
            return _fail("not holding an object")
        if t == held:
            return _fail("cannot place an object on itself")
        if not self.check("InReachOfAgent", t):
            return _fail(f"{p.target} out of reach")
        ref = w.obj(t)
        if p.relation == "inside" and any(j.relevant for j in ref.joints) and not self.check("Open", t):
            return _fail(f"{p.target} is closed")
        pred = "InsideOf" if p.relation == "inside" else "OnTopOf"
        w.agent.held = None
        try:
            P.sample(w, self.kb, (pred, (held, t)), True)
        except (P.SamplingFailure, P.PredicateError) as exc:
            w.agent.held = held
            w.move_object(held, w.hold_position(held))
            return _fail(str(exc))
        return Outcome(True, sim_time=MANIPULATION_TIME)

    def push(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        o = w.obj(t)
        if not self.check("InReachOfAgent", t):
            return _fail(f"{p.target} out of reach")
        joints = [j for j in o.joints if j.relevant]
        if joints:
            j = joints[0]
            j.value = j.upper if p.direction == "open" else j.lower
        elif "toggleable" in self.kb.properties(o.synset):
            o.toggled = p.direction == "open"
        else:
            return _fail(f"{p.target} has no articulation")
        return Outcome(True, sim_time=MANIPULATION_TIME)

    def dip(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        held = w.agent.held
        if held is None or "soakable" not in self.kb.properties(w.obj(held).synset):
            return _fail("not holding a soakable object")
        if not self.check("InReachOfAgent", t):
            return _fail(f"{p.target} out of reach")
        liquid = next((s for s in sorted(w.substances)
                       if w.substances[s].kind == "liquid" and w.substances[s].real
                       and P.check_filled(w, t, s)), None)
        if liquid is None:
            return _fail(f"{p.target} is not filled with a liquid")
        P.sample(w, self.kb, ("Soaked", (held, liquid)), True)
        return Outcome(True, sim_time=MANIPULATION_TIME)

    def wipe(self, p: Primitive, t: str) -> Outcome:
        w = self.w
        held = w.agent.held
        if held is None or "particleRemover" not in self.kb.properties(w.obj(held).synset):
            return _fail("not holding a particle remover")
        if not self.check("InReachOfAgent", t):
            return _fail(f"{p.target} out of reach")
        box = w.box(t)
        try:
            removed = apply_cleaning(w, self.kb, held, t, footprint=(box[0], box[1], box[3], box[4]))
        except CleaningError as exc:
            return _fail(str(exc))
        msg = ", ".join(f"{k}: {v}" for k, v in sorted(removed.items()))
        return Outcome(True, msg, sim_time=MANIPULATION_TIME)


def execute_primitive(world: WorldState, p: Primitive, grounding: Optional[Grounding] = None,
                      dt: float = DEFAULT_DT) -> Outcome:
    """Run one primitive; on success the world is stepped for its duration.

    Precondition violations return ``Outcome(ok=False)`` and leave the world untouched.
    """
    ex = _Executor(world, grounding)
    t = ex.resolve(p.target)
    if t is None or not world.obj(t).spatial and world.agent.held != t:
        return _fail(f"unknown or non-real target {p.target}")
    held_before = world.agent.held
    pos0, joints0 = _kinematic_state(world)
    out = getattr(ex, p.kind)(p, t)
    if not out.ok:
        return out
    if out.sim_time > 0:
        world.advance(out.sim_time, dt)
    pos1, joints1 = _kinematic_state(world)
    skip = {world.agent.id, held_before, world.agent.held}
    for oid in sorted(set(pos0) & set(pos1)):
        if oid in skip or pos0[oid] == pos1[oid]:
            continue
        out.moved[oid] = [list(pos0[oid]), list(pos1[oid])]
    for key in sorted(set(joints0) & set(joints1)):
        kind, radius, v0 = joints0[key]
        v1 = joints1[key][2]
        if v0 != v1:
            out.joints.append([key[0], key[1], kind, radius, v0, v1])
    world.invalidate()
    return out


# ---------------------------------------------------------------- goals and episodes

def domain_of(world: WorldState, kb: KnowledgeBase, synset: str) -> List[str]:
    """Real world entities of ``synset`` or any descendant."""
    out = [i for i, o in world.objects.items()
           if o.real and not o.removed and kb.is_a(o.synset, synset)]
    out += [s for s, sys in world.substances.items() if sys.real and kb.is_a(s, synset)]
    return sorted(out)


def goal_evaluator(world: WorldState, grounding: Grounding) -> Evaluator:
    kb = world.kb
    return Evaluator(lambda pred, args: P.check(world, kb, (pred, tuple(grounding.key(a) for a in args))),
                     lambda syn: domain_of(world, kb, syn))


def evaluate_goal(world: WorldState, grounding: Grounding, goal: Formula) -> Tuple[bool, float]:
    """(satisfied, Q) of a goal in the current world."""
    return goal_evaluator(world, grounding).evaluate(normalize(goal))


@dataclass
class EpisodeReport:
    success: bool
    q_score: float
    dist_nav: float = 0.0
    sim_time: float = 0.0
    kin_dis: float = 0.0
    primitive_count: int = 0
    failures: int = 0
    trace: List[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = REPORT_SCHEMA
        return d


def run_episode(world: WorldState, grounding: Grounding, defn: ActivityDefinition,
                script: Sequence[Primitive], dt: float = DEFAULT_DT) -> EpisodeReport:
    """Execute a script, stopping early once the goal holds."""
    goal = normalize(defn.goal)
    ok, q = goal_evaluator(world, grounding).evaluate(goal)
    rep = EpisodeReport(ok, q)
    for i, p in enumerate(script):
        if rep.success:
            break
        out = execute_primitive(world, p, grounding, dt)
        rep.primitive_count += 1
        if not out.ok:
            rep.failures += 1
        rep.dist_nav += out.dist_nav
        rep.sim_time += out.sim_time
        rep.kin_dis += out.kin_dis
        rep.success, rep.q_score = goal_evaluator(world, grounding).evaluate(goal)
        rep.trace.append({"index": i, "primitive": p.as_dict(), "ok": out.ok, "message": out.message,
                          "dist_nav": out.dist_nav, "sim_time": out.sim_time,
                          "moved": out.moved, "joints": out.joints,
                          "success": rep.success, "q_score": rep.q_score})
    return rep


class TraceError(ValueError):
    pass


def compute_metrics(trace: Sequence[dict]) -> Tuple[float, float, float]:
    """(dist_nav, sim_time, kin_dis) recomputed from trace records."""
    dist = sim = kin = 0.0
    for rec in trace:
        try:
            dist += float(rec["dist_nav"])
            sim += float(rec["sim_time"])
            kin += _kin_dis(rec["moved"], rec["joints"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"malformed trace record: {exc}") from None
    return dist, sim, kin
