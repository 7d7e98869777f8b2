"""Abstract box world: objects, joints, particle systems, rooms and the agent."""
from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from bddlkit import geometry as geo
from bddlkit.kb import KnowledgeBase

log = logging.getLogger(__name__)

SNAPSHOT_SCHEMA = "bddlkit.world/1"
AGENT_HALF = (0.25, 0.25, 0.6)
FLOOR_THICKNESS = 0.02
HOLD_GAP = 0.05
PARK_ORIGIN = (1000.0, 1000.0, 0.0)


class SceneError(ValueError):
    pass


class WorldError(ValueError):
    pass


@dataclass
class Physics:
    """Tunable constants of the abstract simulator (artifact choices)."""

    ambient: float = 23.0
    k_heat: float = 0.04
    k_ambient: float = 0.02
    r_heat: float = 0.5
    contact_eps: float = 0.005
    soak_rate: float = 20.0
    emit_rate: float = 50.0
    particle_volume: float = 1e-5
    k_next: float = 0.5
    n_attempts: int = 100
    fov_half_angle: float = math.pi / 4
    fov_range: float = 5.0
    overlap_tol: float = 1e-6


@dataclass
class Joint:
    name: str
    lower: float
    upper: float
    value: float = 0.0
    relevant: bool = True
    kind: str = "prismatic"
    radius: float = 0.5  # revolute link radius, for displacement accounting

    @property
    def threshold(self) -> float:
        return self.lower + 0.05 * (self.upper - self.lower)

    def travel(self, a: float, b: float) -> float:
        d = abs(b - a)
        return d if self.kind == "prismatic" else d * self.radius


@dataclass
class Region:
    """Box given relative to an object's center."""

    offset: Tuple[float, float, float]
    half_extents: Tuple[float, float, float]

    @classmethod
    def from_doc(cls, doc):
        if doc is None:
            return None
        return cls(tuple(doc.get("offset", (0.0, 0.0, 0.0))), tuple(doc["half_extents"]))

    def absolute(self, center) -> tuple:
        c = (center[0] + self.offset[0], center[1] + self.offset[1], center[2] + self.offset[2])
        return geo.box_from_center(c, self.half_extents)

    def as_doc(self):
        return {"offset": list(self.offset), "half_extents": list(self.half_extents)}


@dataclass
class ObjectState:
    id: str
    synset: str
    position: List[float]
    half_extents: Tuple[float, float, float]
    yaw: float = 0.0
    real: bool = True
    removed: bool = False
    parked: bool = False
    fixed: bool = False
    joints: List[Joint] = field(default_factory=list)
    connected_to: set = field(default_factory=set)
    temperature: float = 23.0
    max_temperature: float = 23.0
    soaked: Dict[str, float] = field(default_factory=dict)
    toggled: bool = False
    sliced: bool = False
    broken: bool = False
    keypoints: Optional[List[List[float]]] = None
    fold_threshold: Optional[float] = None
    unfold_threshold: Optional[float] = None
    container: Optional[Region] = None
    toggle_region: Optional[Region] = None
    source_point: Optional[Tuple[float, float, float]] = None
    sink_region: Optional[Region] = None
    insource: Optional[str] = None
    half_of: Optional[str] = None
    assembly: List[List[str]] = field(default_factory=list)

    @property
    def box(self) -> tuple:
        return geo.box_from_center(self.position, self.half_extents)

    @property
    def spatial(self) -> bool:
        """Participates in spatial queries."""
        return self.real and not self.removed and not self.parked

    def set_temperature(self, t: float) -> None:
        self.temperature = t
        if t > self.max_temperature:
            self.max_temperature = t

    def as_doc(self) -> dict:
        d = {
            "id": self.id, "synset": self.synset, "position": list(self.position),
            "half_extents": list(self.half_extents), "yaw": self.yaw, "real": self.real,
            "removed": self.removed, "parked": self.parked, "fixed": self.fixed,
            "joints": [asdict(j) for j in self.joints],
            "connected_to": sorted(self.connected_to),
            "temperature": self.temperature, "max_temperature": self.max_temperature,
            "soaked": dict(sorted(self.soaked.items())), "toggled": self.toggled,
            "sliced": self.sliced, "broken": self.broken,
        }
        for name in ("keypoints", "fold_threshold", "unfold_threshold", "insource", "half_of"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        for name in ("container", "toggle_region", "sink_region"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v.as_doc()
        if self.source_point is not None:
            d["source_point"] = list(self.source_point)
        if self.assembly:
            d["assembly"] = [list(p) for p in self.assembly]
        return d


@dataclass
class ParticleSystem:
    synset: str
    kind: str  # liquid | visualSubstance | physicalSubstance
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    temperatures: np.ndarray = field(default_factory=lambda: np.zeros(0))
    owners: List[str] = field(default_factory=list)  # "" for free particles
    particle_volume: float = 1e-5
    real: bool = True

    def __len__(self) -> int:
        return len(self.positions)

    def add(self, points, temperature: float, owner: str = "") -> None:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if not len(pts):
            return
        self.positions = np.vstack([self.positions, pts])
        self.temperatures = np.concatenate([self.temperatures, np.full(len(pts), float(temperature))])
        self.owners.extend([owner] * len(pts))

    def delete(self, indices: Iterable[int]) -> int:
        idx = sorted(set(int(i) for i in indices))
        if not idx:
            return 0
        keep = np.ones(len(self.positions), dtype=bool)
        keep[idx] = False
        self.positions = self.positions[keep]
        self.temperatures = self.temperatures[keep]
        self.owners = [o for o, k in zip(self.owners, keep) if k]
        return len(idx)

    def free_mask(self) -> np.ndarray:
        if not any(self.owners):
            return np.ones(len(self.owners), dtype=bool)
        return np.array([o == "" for o in self.owners], dtype=bool)

    def as_doc(self) -> dict:
        return {"synset": self.synset, "kind": self.kind, "real": self.real,
                "particle_volume": self.particle_volume,
                "positions": self.positions.tolist(), "temperatures": self.temperatures.tolist(),
                "owners": list(self.owners)}


@dataclass
class Room:
    id: str
    type: str
    rects: List[Tuple[float, float, float, float]]

    def contains(self, x: float, y: float) -> bool:
        return any(r[0] <= x <= r[2] and r[1] <= y <= r[3] for r in self.rects)


@dataclass
class AgentState:
    id: str = "agent"
    heading: float = 0.0
    held: Optional[str] = None


def points_in_box(points: np.ndarray, box) -> np.ndarray:
    if not len(points):
        return np.zeros(0, dtype=bool)
    lo = np.asarray(box[:3])
    hi = np.asarray(box[3:])
    return np.all((points >= lo) & (points <= hi), axis=1)


def points_box_distance(points: np.ndarray, box) -> np.ndarray:
    if not len(points):
        return np.zeros(0)
    lo = np.asarray(box[:3])
    hi = np.asarray(box[3:])
    gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.sqrt(np.sum(gap * gap, axis=1))


class WorldState:
    """Mutable world.  One writer at a time; snapshots move between threads."""

    def __init__(self, kb: KnowledgeBase, physics: Optional[Physics] = None, seed: int = 0):
        self.kb = kb
        self.physics = physics or Physics()
        self.name = ""
        self.objects: Dict[str, ObjectState] = {}
        self.substances: Dict[str, ParticleSystem] = {}
        self.rooms: Dict[str, Room] = {}
        self.agent = AgentState()
        self.clock = 0.0
        self.rng = np.random.default_rng(seed)
        self.accumulators: Dict[str, float] = {}
        self.rule_timers: Dict[str, float] = {}
        self.flux: Dict[str, Dict[str, int]] = {}
        self.warnings: List[str] = []
        self._contacts: Optional[List[Tuple[str, str]]] = None

    # ---------------------------------------------------------------- lookup

    def obj(self, oid: str) -> ObjectState:
        try:
            return self.objects[oid]
        except KeyError:
            raise WorldError(f"unknown object {oid!r}") from None

    def is_entity(self, key: str) -> bool:
        return key in self.objects or key in self.substances

    def spatial_ids(self, exclude: Iterable[str] = ()) -> List[str]:
        ex = set(exclude)
        return sorted(i for i, o in self.objects.items() if o.spatial and i not in ex)

    def box(self, oid: str) -> tuple:
        return self.obj(oid).box

    def container_box(self, oid: str) -> Optional[tuple]:
        o = self.obj(oid)
        return o.container.absolute(o.position) if o.container else None

    def inner_box(self, oid: str) -> tuple:
        """Container volume if modelled, else the object's own box."""
        return self.container_box(oid) or self.box(oid)

    def floors(self) -> List[str]:
        return sorted(i for i, o in self.objects.items() if o.synset == "floor.n.01" and o.spatial)

    def room_of_point(self, x: float, y: float) -> Optional[str]:
        for rid in sorted(self.rooms):
            if self.rooms[rid].contains(x, y):
                return rid
        return None

    def room_of(self, oid: str) -> Optional[str]:
        o = self.obj(oid)
        return self.room_of_point(o.position[0], o.position[1])

    @property
    def agent_position(self) -> Tuple[float, float]:
        body = self.objects.get(self.agent.id)
        if body is None:
            return (0.0, 0.0)
        return (body.position[0], body.position[1])

    def param(self, synset: str, name: str):
        return self.kb.param(synset, name) if synset in self.kb else None

    # ---------------------------------------------------------------- geometry

    def ray_query(self, origin, direction, exclude: Iterable[str] = ()) -> List[Tuple[str, float]]:
        """Real objects hit by a ray, nearest first (ties by id)."""
        ids = self.spatial_ids(exclude)
        hits = geo.ray_cast(tuple(origin), tuple(direction), [self.objects[i].box for i in ids])
        out = [(ids[i], d) for i, d in hits]
        out.sort(key=lambda h: (h[1], h[0]))
        return out

    def in_contact(self, a: str, b: str) -> bool:
        if self.agent.held is not None and {a, b} == {self.agent.id, self.agent.held}:
            return False
        return geo.box_distance(self.box(a), self.box(b)) <= self.physics.contact_eps

    @property
    def contacts(self) -> List[Tuple[str, str]]:
        if self._contacts is None:
            ids = self.spatial_ids()
            boxes = [self.objects[i].box for i in ids]
            pairs = []
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    if geo.box_distance(boxes[i], boxes[j]) <= self.physics.contact_eps:
                        if not self.in_contact(ids[i], ids[j]):
                            continue
                        pairs.append((ids[i], ids[j]))
            self._contacts = pairs
        return self._contacts

    def invalidate(self) -> None:
        self._contacts = None

    def collides(self, box, ignore: Iterable[str] = ()) -> Optional[str]:
        """First real object interpenetrating ``box``, skipping hollow hosts.

        Overlap with an object is tolerated when ``box`` lies entirely inside
        that object's container volume.
        """
        ign = set(ignore)
        if self.agent.held:
            ign.add(self.agent.held)
        tol = self.physics.overlap_tol
        for oid in self.spatial_ids(ign):
            o = self.objects[oid]
            if not geo.boxes_overlap(box, o.box, tol):
                continue
            inner = self.container_box(oid)
            if inner is not None and geo.box_contains_box(inner, box):
                continue
            return oid
        return None

    def dependents(self, oid: str) -> List[str]:
        """Objects resting on or inside ``oid``, transitively."""
        out: List[str] = []
        frontier = [oid]
        eps = self.physics.contact_eps
        while frontier:
            cur = frontier.pop()
            base = self.objects[cur]
            top = base.box
            inner = self.container_box(cur)
            for other in self.spatial_ids([oid, self.agent.id] + out):
                if other == self.agent.held and cur != self.agent.id:
                    continue
                o = self.objects[other]
                c = o.position
                if o.fixed:
                    continue
                on_top = (top[0] <= c[0] <= top[3] and top[1] <= c[1] <= top[4]
                          and abs(o.box[2] - top[5]) <= eps)
                inside = inner is not None and geo.point_in_box(c, inner)
                if on_top or inside:
                    out.append(other)
                    frontier.append(other)
        return out

    def move_object(self, oid: str, position, carry: bool = True) -> None:
        """Teleport an object, bringing along contained particles and resting objects."""
        o = self.obj(oid)
        old = tuple(o.position)
        delta = np.array(position, dtype=float) - np.array(old)
        if not delta.any():
            return
        movers = [oid] + (self.dependents(oid) if carry and o.spatial else [])
        boxes = {m: (self.objects[m].box, self.container_box(m)) for m in movers}
        for sys in self.substances.values():
            if not len(sys):
                continue
            mask = np.zeros(len(sys), dtype=bool)
            owners = np.array(sys.owners, dtype=object)
            for m in movers:
                mask |= owners == m
                inner = boxes[m][1]
                if inner is not None and sys.kind != "visualSubstance":
                    mask |= points_in_box(sys.positions, inner) & (owners == "")
            if mask.any():
                sys.positions[mask] += delta
        for m in movers:
            mo = self.objects[m]
            mo.position = [float(mo.position[k] + delta[k]) for k in range(3)]
            if mo.keypoints:
                mo.keypoints = [[p[k] + float(delta[k]) for k in range(3)] for p in mo.keypoints]
        self.invalidate()

    def park(self, oid: str) -> None:
        o = self.obj(oid)
        k = sorted(self.objects).index(oid)
        o.position = [PARK_ORIGIN[0] + 10.0 * k, PARK_ORIGIN[1], PARK_ORIGIN[2] + o.half_extents[2]]
        o.parked = True
        self.invalidate()

    def hold_position(self, oid: str) -> List[float]:
        body = self.obj(self.agent.id)
        o = self.obj(oid)
        return [body.position[0], body.position[1], body.box[5] + HOLD_GAP + o.half_extents[2]]

    # ---------------------------------------------------------------- creation

    def new_id(self, synset: str) -> str:
        k = 1
        while f"{synset}_{k}" in self.objects:
            k += 1
        return f"{synset}_{k}"

    def create_object(self, oid: str, synset: str, position=None, *, real: bool = True,
                      parked: bool = False, **overrides) -> ObjectState:
        if oid in self.objects:
            raise WorldError(f"duplicate object id {oid!r}")
        if synset not in self.kb:
            raise WorldError(f"unknown synset {synset!r}")
        model = self.kb.model(synset)
        half = tuple(overrides.pop("half_extents", None) or model.get("half_extents") or (0.05, 0.05, 0.05))
        joints = overrides.pop("joints", None)
        if joints is None:
            joints = [dict(j) for j in model.get("joints", [])]
        o = ObjectState(
            id=oid, synset=synset,
            position=list(position) if position is not None else [0.0, 0.0, half[2]],
            half_extents=half, real=real, parked=parked,
            fixed=bool(overrides.pop("fixed", model.get("fixed", False))),
            joints=[j if isinstance(j, Joint) else _joint(j) for j in joints],
            container=Region.from_doc(overrides.pop("container", model.get("container"))),
            toggle_region=Region.from_doc(overrides.pop("toggle_region", model.get("toggle_region"))),
            sink_region=Region.from_doc(overrides.pop("sink_region", model.get("sink_region"))),
            temperature=self.physics.ambient, max_temperature=self.physics.ambient,
        )
        sp = overrides.pop("source_point", model.get("source_point"))
        o.source_point = tuple(sp) if sp is not None else None
        for k, v in overrides.items():
            setattr(o, k, v)
        self.objects[oid] = o
        if parked:
            self.park(oid)
        self.invalidate()
        return o

    def ensure_system(self, synset: str) -> ParticleSystem:
        sys = self.substances.get(synset)
        if sys is None:
            kind = self.kb.substance_kind(synset)
            if kind is None:
                raise WorldError(f"{synset} is not a substance")
            if kind in ("microPhysicalSubstance", "macroPhysicalSubstance"):
                kind = "physicalSubstance"
            sys = ParticleSystem(synset, kind, particle_volume=self.physics.particle_volume)
            self.substances[synset] = sys
        return sys

    def add_room(self, rid: str, rtype: str, rects) -> None:
        self.rooms[rid] = Room(rid, rtype, [tuple(map(float, r)) for r in rects])

    # ---------------------------------------------------------------- temperature

    def machine_temperature(self, oid: str) -> float:
        """Interior temperature: the source output when active, else the object's own."""
        o = self.obj(oid)
        src = self._source_temperature(o)
        return src if src is not None else o.temperature

    def _active(self, o: ObjectState, props) -> bool:
        return "toggleable" not in props or o.toggled

    def _source_temperature(self, o: ObjectState) -> Optional[float]:
        props = self.kb.properties(o.synset)
        if props & {"heatSource", "fireSource"} and self._active(o, props):
            return float(self.kb.param(o.synset, "heat_source_temperature"))
        return None

    def _sources(self):
        heat, cold = [], []
        for oid in self.spatial_ids([self.agent.id]):
            o = self.objects[oid]
            props = self.kb.properties(o.synset)
            t = self._source_temperature(o)
            if t is not None:
                heat.append((oid, t, o.box))
            elif "flammable" in props and o.temperature >= self.kb.param(o.synset, "onfire_temperature"):
                heat.append((oid, float(self.kb.param(o.synset, "onfire_temperature")), o.box))
            if "coldSource" in props and self._active(o, props):
                cold.append((oid, float(self.kb.param(o.synset, "cold_source_temperature")), o.box))
        return heat, cold

    def _influenced(self, box, center, src_box) -> bool:
        return geo.point_in_box(center, src_box) or geo.box_distance(box, src_box) <= self.physics.r_heat

    def _step_temperature(self, dt: float, heat, cold) -> None:
        ph = self.physics
        f_heat = math.exp(-ph.k_heat * dt)
        f_amb = math.exp(-ph.k_ambient * dt)
        for oid in self.spatial_ids([self.agent.id]):
            o = self.objects[oid]
            box = o.box
            target, factor = None, f_amb
            hot = [t for sid, t, sb in heat if sid != oid and self._influenced(box, o.position, sb)]
            if hot:
                target, factor = max(hot), f_heat
            else:
                chill = [t for sid, t, sb in cold if sid != oid and self._influenced(box, o.position, sb)]
                if chill:
                    target, factor = min(chill), f_heat
            if target is None:
                target = ph.ambient
            o.set_temperature(target + (o.temperature - target) * factor)
        for sys in self.substances.values():
            if sys.kind != "liquid" or not len(sys):
                continue
            best = np.full(len(sys), -np.inf)
            for _, t, sb in heat:
                near = points_box_distance(sys.positions, sb) <= ph.r_heat
                best = np.where(near, np.maximum(best, t), best)
            coldest = np.full(len(sys), np.inf)
            for _, t, sb in cold:
                near = points_box_distance(sys.positions, sb) <= ph.r_heat
                coldest = np.where(near, np.minimum(coldest, t), coldest)
            target = np.where(np.isfinite(best), best, np.where(np.isfinite(coldest), coldest, ph.ambient))
            factor = np.where(np.isfinite(best) | np.isfinite(coldest), f_heat, f_amb)
            sys.temperatures = target + (sys.temperatures - target) * factor

    def _step_fire(self, burning: Sequence[str]) -> None:
        for oid in burning:
            o = self.objects[oid]
            if o.spatial:
                o.set_temperature(max(o.temperature, float(self.kb.param(o.synset, "onfire_temperature"))))

    def _take(self, key: str, rate: float, dt: float) -> int:
        acc = self.accumulators.get(key, 0.0) + rate * dt
        n = int(math.floor(acc + 1e-9))
        self.accumulators[key] = acc - n
        return n

    def _step_soak(self, dt: float) -> None:
        eps = self.physics.contact_eps
        for oid in self.spatial_ids([self.agent.id]):
            o = self.objects[oid]
            if "soakable" not in self.kb.properties(o.synset):
                continue
            for syn in sorted(self.substances):
                sys = self.substances[syn]
                if sys.kind != "liquid" or not len(sys):
                    continue
                touching = np.nonzero((points_box_distance(sys.positions, o.box) <= eps) & sys.free_mask())[0]
                if not len(touching):
                    continue
                n = min(self._take(f"soak:{oid}:{syn}", self.physics.soak_rate, dt), len(touching))
                if n:
                    sys.delete(touching[:n])
                    o.soaked[syn] = o.soaked.get(syn, 0.0) + n
                    self.flux.setdefault(syn, _flux())["absorbed"] += n

    def _step_sources(self, dt: float) -> None:
        for oid in self.spatial_ids([self.agent.id]):
            o = self.objects[oid]
            props = self.kb.properties(o.synset)
            if o.source_point is not None and props & {"waterSource", "particleSource"} \
                    and "toggleable" in props and o.toggled:
                syn = o.insource or "water.n.06"
                if syn not in self.kb:
                    continue
                n = self._take(f"emit:{oid}", self.physics.emit_rate, dt)
                if n:
                    p = [o.position[k] + o.source_point[k] for k in range(3)]
                    self.ensure_system(syn).add([p] * n, self.physics.ambient)
                    self.flux.setdefault(syn, _flux())["emitted"] += n
            if o.sink_region is not None and "particleSink" in props:
                region = o.sink_region.absolute(o.position)
                for syn in sorted(self.substances):
                    sys = self.substances[syn]
                    if sys.kind == "visualSubstance" or not len(sys):
                        continue
                    idx = np.nonzero(points_in_box(sys.positions, region) & sys.free_mask())[0]
                    if len(idx):
                        sys.delete(idx)
                        self.flux.setdefault(syn, _flux())["sunk"] += len(idx)

    def step(self, dt: float) -> "WorldState":
        """Advance the clock and update extended states in a fixed order."""
        if not dt > 0:
            raise WorldError("dt must be positive")
        self.flux = {}
        heat, cold = self._sources()
        burning = [sid for sid, _, _ in heat if "flammable" in self.kb.properties(self.objects[sid].synset)
                   and self._source_temperature(self.objects[sid]) is None]
        self._step_temperature(dt, heat, cold)
        self._step_fire(burning)
        self._step_soak(dt)
        self._step_sources(dt)
        from bddlkit.transitions import step_rules
        step_rules(self, dt)
        self.clock += dt
        self.invalidate()
        return self

    def advance(self, duration: float, dt: float) -> None:
        """Step repeatedly with ``dt`` until ``duration`` seconds have elapsed."""
        remaining = float(duration)
        while remaining > 1e-12:
            h = min(dt, remaining)
            self.step(h)
            remaining -= h

    # ---------------------------------------------------------------- snapshot

    def snapshot(self) -> dict:
        return {
            "schema": SNAPSHOT_SCHEMA,
            "name": self.name,
            "clock": self.clock,
            "physics": asdict(self.physics),
            "rooms": [{"id": r.id, "type": r.type, "rects": [list(x) for x in r.rects]}
                      for r in sorted(self.rooms.values(), key=lambda r: r.id)],
            "objects": [self.objects[i].as_doc() for i in sorted(self.objects)],
            "agent": {"id": self.agent.id, "position": list(self.agent_position),
                      "heading": self.agent.heading, "held": self.agent.held},
            "substances": [self.substances[s].as_doc() for s in sorted(self.substances)],
            "rng": _jsonable(self.rng.bit_generator.state),
            "accumulators": dict(sorted(self.accumulators.items())),
            "rule_timers": dict(sorted(self.rule_timers.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, indent=1)

    def copy(self) -> "WorldState":
        return load_scene(self.snapshot(), self.kb)


def _flux():
    return {"emitted": 0, "absorbed": 0, "sunk": 0, "consumed": 0, "produced": 0}


def _jsonable(state):
    if isinstance(state, dict):
        return {k: _jsonable(v) for k, v in state.items()}
    if isinstance(state, np.integer):
        return int(state)
    return state


def _joint(doc) -> Joint:
    j = Joint(name=doc["name"], lower=float(doc["lower"]), upper=float(doc["upper"]),
              value=float(doc.get("value", doc["lower"])), relevant=bool(doc.get("relevant", True)),
              kind=doc.get("kind", "prismatic"), radius=float(doc.get("radius", 0.5)))
    if not j.lower <= j.value <= j.upper:
        raise SceneError(f"joint {j.name} value {j.value} outside [{j.lower}, {j.upper}]")
    return j


_PARTICLE_FIELDS = ("positions", "temperatures", "owners")


@functools.lru_cache(maxsize=1)
def _scene_validator():
    import jsonschema

    with resources.files("bddlkit").joinpath("schemas/scene.schema.json").open() as fh:
        schema = json.load(fh)
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    return cls(schema)


def _rects_overlap(a, b) -> bool:
    return min(a[2], b[2]) - max(a[0], b[0]) > 1e-9 and min(a[3], b[3]) - max(a[1], b[1]) > 1e-9


_OBJECT_STATE_FIELDS = {f.name for f in fields(ObjectState)}


def load_scene(document, kb: KnowledgeBase, seed: Optional[int] = None) -> WorldState:
    """Build a world from a scene document or a world snapshot (dict or path)."""
    if isinstance(document, str):
        with open(document, encoding="utf-8") as fh:
            document = json.load(fh)
    import jsonschema

    # Particle arrays are checked with numpy below; walking them in jsonschema is slow.
    light = dict(document)
    if "substances" in light and isinstance(light["substances"], list):
        light["substances"] = [{k: v for k, v in s.items() if k not in _PARTICLE_FIELDS}
                               if isinstance(s, dict) else s for s in light["substances"]]
    err = jsonschema.exceptions.best_match(_scene_validator().iter_errors(light))
    if err is not None:
        raise SceneError(f"scene schema violation: {err.message}")

    physics = Physics(**document.get("physics", {}))
    if "ambient" in document:
        physics.ambient = float(document["ambient"])
    world = WorldState(kb, physics, seed if seed is not None else int(document.get("seed", 0)))
    world.name = document.get("name", "")
    world.clock = float(document.get("clock", 0.0))

    rooms = document.get("rooms", [])
    for r in rooms:
        if r["id"] in world.rooms:
            raise SceneError(f"duplicate room id {r['id']!r}")
        world.add_room(r["id"], r["type"], r["rects"])
    rl = list(world.rooms.values())
    for i in range(len(rl)):
        for j in range(i + 1, len(rl)):
            if any(_rects_overlap(a, b) for a in rl[i].rects for b in rl[j].rects):
                raise SceneError(f"rooms {rl[i].id} and {rl[j].id} overlap")

    for doc in document.get("objects", []):
        oid, syn = doc["id"], doc["synset"]
        if syn not in kb:
            raise SceneError(f"object {oid}: unknown synset {syn!r}")
        if not kb.is_leaf(syn):
            raise SceneError(f"object {oid}: synset {syn} is not a leaf")
        if oid in world.objects:
            raise SceneError(f"duplicate object id {oid!r}")
        extra = {k: v for k, v in doc.items() if k in _OBJECT_STATE_FIELDS
                 and k not in ("id", "synset", "position", "joints", "connected_to", "soaked")}
        if "source_point" in extra:
            extra["source_point"] = tuple(extra["source_point"])
        for k in ("container", "toggle_region", "sink_region"):
            if k in extra:
                extra[k] = extra[k]
        if "half_extents" in extra:
            extra["half_extents"] = tuple(extra["half_extents"])
        parked = bool(extra.pop("parked", False))
        try:
            o = world.create_object(oid, syn, doc["position"], joints=doc.get("joints"), **extra)
        except WorldError as exc:
            raise SceneError(str(exc)) from None
        o.parked = parked
        o.connected_to = set(doc.get("connected_to", ()))
        o.soaked = {k: float(v) for k, v in doc.get("soaked", {}).items()}
        o.temperature = float(doc.get("temperature", physics.ambient))
        o.max_temperature = max(float(doc.get("max_temperature", o.temperature)), o.temperature)
        if o.spatial and world.rooms and o.synset != "floor.n.01" \
                and world.room_of_point(o.position[0], o.position[1]) is None:
            msg = f"object {oid} lies outside all rooms"
            world.warnings.append(msg)
            log.warning(msg)

    for r in sorted(world.rooms.values(), key=lambda r: r.id):
        for k, rect in enumerate(r.rects):
            fid = f"floor_{r.id}" if k == 0 else f"floor_{r.id}_{k}"
            if fid in world.objects:
                continue
            cx, cy = (rect[0] + rect[2]) / 2, (rect[1] + rect[3]) / 2
            world.create_object(fid, "floor.n.01", (cx, cy, -FLOOR_THICKNESS / 2),
                                half_extents=((rect[2] - rect[0]) / 2, (rect[3] - rect[1]) / 2,
                                              FLOOR_THICKNESS / 2), fixed=True)

    agent = document.get("agent")
    if agent is not None:
        aid = agent.get("id", "agent")
        world.agent = AgentState(aid, float(agent.get("heading", 0.0)), agent.get("held"))
        if aid not in world.objects:
            x, y = agent.get("position", (0.0, 0.0))[:2]
            world.create_object(aid, "agent.n.01", (x, y, AGENT_HALF[2]), half_extents=AGENT_HALF)
    elif "agent.n.01" in kb:
        world.create_object("agent", "agent.n.01", (0.0, 0.0, AGENT_HALF[2]), half_extents=AGENT_HALF)

    for sdoc in document.get("substances", []):
        syn = sdoc["synset"]
        if syn not in kb:
            raise SceneError(f"unknown substance synset {syn!r}")
        sys = world.ensure_system(syn)
        sys.real = bool(sdoc.get("real", True))
        sys.particle_volume = float(sdoc.get("particle_volume", physics.particle_volume))
        try:
            pts = np.asarray(sdoc.get("positions", []), dtype=float).reshape(-1, 3)
        except ValueError:
            raise SceneError(f"substance {syn}: positions must be a list of 3-vectors") from None
        sys.positions = pts
        temps = sdoc.get("temperatures")
        sys.temperatures = (np.asarray(temps, dtype=float) if temps is not None
                            else np.full(len(pts), physics.ambient))
        sys.owners = list(sdoc.get("owners", [""] * len(pts)))
        if not all(isinstance(o, str) for o in sys.owners):
            raise SceneError(f"substance {syn}: owners must be object ids or empty strings")
        if len(sys.temperatures) != len(pts) or len(sys.owners) != len(pts):
            raise SceneError(f"substance {syn}: particle arrays differ in length")

    if "rng" in document:
        world.rng.bit_generator.state = document["rng"]
    world.accumulators = {k: float(v) for k, v in document.get("accumulators", {}).items()}
    world.rule_timers = {k: float(v) for k, v in document.get("rule_timers", {}).items()}
    return world


def scene_instances(document) -> Dict[str, str]:
    """Scene objects pre-bound to activity instances via an ``instance`` field."""
    if isinstance(document, str):
        with open(document, encoding="utf-8") as fh:
            document = json.load(fh)
    return {o["instance"]: o["id"] for o in document.get("objects", []) if "instance" in o}


# ---------------------------------------------------------------- irreversible events

def _split(world: WorldState, oid: str, pieces: Sequence[Tuple[List[float], Tuple[float, float, float]]],
           synset: str, marker: Optional[str]) -> List[str]:
    o = world.obj(oid)
    new = []
    for center, half in pieces:
        nid = world.new_id(synset)
        n = world.create_object(nid, synset, center, half_extents=half)
        n.temperature, n.max_temperature = o.temperature, o.max_temperature
        n.soaked = dict(o.soaked)
        n.half_of = marker
        new.append(nid)
    for sys in world.substances.values():
        sys.owners = [new[0] if w == oid else w for w in sys.owners]
    for other in world.objects.values():
        if oid in other.connected_to:
            other.connected_to.discard(oid)
    o.connected_to = set()
    o.real = False
    o.removed = True
    if world.agent.held == oid:
        world.agent.held = None
    world.invalidate()
    return new


def slice_object(world: WorldState, oid: str) -> List[str]:
    """Replace ``oid`` by two halves split across its longest axis."""
    o = world.obj(oid)
    if o.sliced:
        return []
    axis = max(range(3), key=lambda k: (o.half_extents[k], -k))
    half = list(o.half_extents)
    half[axis] /= 2
    pieces = []
    for sign in (-1.0, 1.0):
        c = list(o.position)
        c[axis] += sign * half[axis]
        pieces.append((c, tuple(half)))
    name, rest = o.synset.split(".", 1)
    derived = f"half__{name}.{rest}"
    if derived in world.kb:
        synset, marker = derived, None
    else:
        synset, marker = o.synset, oid
    out = _split(world, oid, pieces, synset, marker)
    o.sliced = True
    return out


def break_object(world: WorldState, oid: str) -> List[str]:
    """Replace ``oid`` by four fragments split across its two longest axes."""
    o = world.obj(oid)
    if o.broken:
        return []
    order = sorted(range(3), key=lambda k: (-o.half_extents[k], k))
    a, b = order[0], order[1]
    half = list(o.half_extents)
    half[a] /= 2
    half[b] /= 2
    pieces = []
    for sa in (-1.0, 1.0):
        for sb in (-1.0, 1.0):
            c = list(o.position)
            c[a] += sa * half[a]
            c[b] += sb * half[b]
            pieces.append((c, tuple(half)))
    out = _split(world, oid, pieces, o.synset, oid)
    o.broken = True
    return out


def apply_contact_event(world: WorldState, tool: str, target: str, force: float) -> List[str]:
    """Resolve a tool/target contact with the given force; returns the events that fired."""
    t, o = world.obj(tool), world.obj(target)
    if not (t.real and not t.removed) or not (o.real and not o.removed):
        raise WorldError("contact events need two real objects")
    kb = world.kb
    events = []
    if o.toggle_region is not None:
        region = o.toggle_region.absolute(o.position)
        if geo.box_distance(t.box, region) <= world.physics.contact_eps:
            o.toggled = not o.toggled
            events.append("toggled")
    tp, op = kb.properties(t.synset), kb.properties(o.synset)
    if "slicingTool" in tp and "sliceable" in op and force >= kb.param(o.synset, "slice_force"):
        slice_object(world, target)
        events.append("sliced")
    elif "breakable" in op and force >= kb.param(o.synset, "break_force"):
        break_object(world, target)
        events.append("broken")
    return events
