"""Transition machine: rule matching, rule application and gated cleaning."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bddlkit import geometry as geo
from bddlkit.kb import KnowledgeBase, TransitionRule
from bddlkit.world import WorldState, WorldError, points_box_distance, points_in_box

log = logging.getLogger(__name__)


class StaleRuleError(RuntimeError):
    pass


class CleaningError(ValueError):
    pass


@dataclass(frozen=True)
class RuleInstance:
    rule_id: str
    machine: str
    inputs: Tuple[str, ...]  # object ids or substance synsets, aligned with the rule inputs
    toggled: bool
    temperature: float
    contained: bool

    @property
    def key(self) -> str:
        return "|".join((self.rule_id, self.machine) + self.inputs)


def _rule(kb: KnowledgeBase, rule_id: str) -> TransitionRule:
    for r in kb.rules:
        if r.rule_id == rule_id:
            return r
    raise KeyError(f"unknown rule {rule_id!r}")


def _triggered(world: WorldState, kb: KnowledgeBase, rule: TransitionRule, machine: str) -> bool:
    m = world.objects[machine]
    if rule.toggled_on and not m.toggled:
        return False
    if rule.min_temperature is not None and world.machine_temperature(machine) < rule.min_temperature:
        return False
    if rule.requires_connected is not None:
        ok = any(c in world.objects and world.objects[c].spatial
                 and kb.is_a(world.objects[c].synset, rule.requires_connected)
                 for c in m.connected_to)
        if not ok:
            return False
    return True


def _substance_inside(world: WorldState, synset: str, box) -> bool:
    sys = world.substances.get(synset)
    if sys is None or not sys.real or not len(sys):
        return False
    return bool(np.any(points_in_box(sys.positions, box) & sys.free_mask()))


def _input_ok(world, kb, rule, machine, wanted, key) -> bool:
    box = world.inner_box(machine)
    if kb.is_substance(wanted):
        if not kb.is_a(key, wanted):
            return False
        if rule.containment:
            return _substance_inside(world, key, box)
        sys = world.substances.get(key)
        return sys is not None and sys.real
    o = world.objects.get(key)
    if o is None or not o.spatial or key == machine or not kb.is_a(o.synset, wanted):
        return False
    return not rule.containment or geo.point_in_box(o.position, box)


def _bind(world, kb, rule, machine, used) -> Optional[Tuple[str, ...]]:
    out = []
    taken = set(used)
    for wanted in rule.inputs:
        if kb.is_substance(wanted):
            pool = sorted(world.substances)
        else:
            pool = world.spatial_ids([machine, world.agent.id])
        hit = next((k for k in pool if k not in taken and _input_ok(world, kb, rule, machine, wanted, k)), None)
        if hit is None:
            return None
        out.append(hit)
        taken.add(hit)
    return tuple(out)


def match_rules(world: WorldState, kb: KnowledgeBase) -> List[RuleInstance]:
    """All currently triggered rule instances, ordered by rule id then machine id."""
    found = []
    ids = world.spatial_ids([world.agent.id])
    for rule in sorted(kb.rules, key=lambda r: r.rule_id):
        machines = [i for i in ids if kb.is_a(world.objects[i].synset, rule.machine)]
        for m in machines:
            if not _triggered(world, kb, rule, m):
                continue
            used: set = set()
            while True:
                binding = _bind(world, kb, rule, m, used)
                if binding is None:
                    break
                found.append(RuleInstance(rule.rule_id, m, binding, world.objects[m].toggled,
                                          world.machine_temperature(m), rule.containment))
                used.update(binding)
    return found


def _consume(world: WorldState, kb: KnowledgeBase, key: str, machine: str) -> None:
    if key in world.objects:
        o = world.objects[key]
        o.real = False
        o.removed = True
        if world.agent.held == key:
            world.agent.held = None
        for other in world.objects.values():
            other.connected_to.discard(key)
        o.connected_to = set()
        return
    sys = world.substances[key]
    idx = np.nonzero(points_in_box(sys.positions, world.inner_box(machine)) & sys.free_mask())[0]
    n = sys.delete(idx)
    world.flux.setdefault(key, {"emitted": 0, "absorbed": 0, "sunk": 0, "consumed": 0, "produced": 0})
    world.flux[key]["consumed"] += n


def _leaf(kb: KnowledgeBase, synset: str) -> str:
    return synset if kb.is_leaf(synset) else kb.leaves_under(synset)[0]


def _spawn_object(world: WorldState, kb: KnowledgeBase, synset: str, machine: str, temp: float) -> str:
    from bddlkit.predicates import SamplingFailure, sample

    pending = sorted(i for i, o in world.objects.items()
                     if o.synset == synset and not o.real and not o.removed)
    if pending:
        oid = pending[0]
    else:
        oid = world.new_id(synset)
        world.create_object(oid, synset)
    o = world.objects[oid]
    o.real = True
    world.park(oid)
    try:
        sample(world, kb, ("InsideOf", (oid, machine)), True)
    except SamplingFailure:
        inner = world.inner_box(machine)
        c = geo.box_center(inner)
        o.parked = False
        world.move_object(oid, (c[0], c[1], inner[2] + o.half_extents[2]), carry=False)
    o.temperature = temp
    o.max_temperature = temp
    return oid


def _spawn_substance(world: WorldState, kb: KnowledgeBase, synset: str, machine: str, temp: float) -> str:
    from bddlkit.predicates import grid_points, particles_for_fraction

    sys = world.ensure_system(synset)
    sys.real = True
    box = world.inner_box(machine)
    m = world.objects[machine]
    if "fillable" in kb.properties(m.synset):
        frac = kb.param(m.synset, "filled_threshold")
    else:
        frac = 0.5
    n = max(particles_for_fraction(frac, geo.box_volume(box), sys.particle_volume), 1)
    sys.add(grid_points(box, n, sys.particle_volume ** (1 / 3)), temp)
    world.flux.setdefault(synset, {"emitted": 0, "absorbed": 0, "sunk": 0, "consumed": 0, "produced": 0})
    world.flux[synset]["produced"] += n
    return synset


def apply_rule(world: WorldState, kb: KnowledgeBase, instance: RuleInstance) -> List[str]:
    """Consume the bound inputs and materialize outputs inside the machine."""
    rule = _rule(kb, instance.rule_id)
    m = world.objects.get(instance.machine)
    if m is None or not m.spatial or not _triggered(world, kb, rule, instance.machine):
        raise StaleRuleError(f"rule {rule.rule_id}: machine {instance.machine} no longer triggered")
    if len(instance.inputs) != len(rule.inputs) or len(set(instance.inputs)) != len(instance.inputs):
        raise StaleRuleError(f"rule {rule.rule_id}: malformed binding")
    for wanted, key in zip(rule.inputs, instance.inputs):
        if not _input_ok(world, kb, rule, instance.machine, wanted, key):
            raise StaleRuleError(f"rule {rule.rule_id}: input {key} no longer available")
    temp = world.machine_temperature(instance.machine)
    for i, key in enumerate(instance.inputs):
        if rule.consumes(i):
            _consume(world, kb, key, instance.machine)
    world.invalidate()
    out = []
    for syn in rule.outputs:
        leaf = _leaf(kb, syn)
        if kb.is_substance(leaf):
            out.append(_spawn_substance(world, kb, leaf, instance.machine, temp))
        else:
            out.append(_spawn_object(world, kb, leaf, instance.machine, temp))
    world.invalidate()
    log.debug("applied %s in %s -> %s", rule.rule_id, instance.machine, out)
    return out


def step_rules(world: WorldState, dt: float) -> List[Tuple[str, List[str]]]:
    """Fire triggered rules whose duration requirement is met; losers wait a step."""
    kb = world.kb
    if not kb.rules:
        return []
    fired = []
    spent: set = set()
    seen = set()
    for inst in match_rules(world, kb):
        seen.add(inst.key)
        rule = _rule(kb, inst.rule_id)
        timer = world.rule_timers.get(inst.key, 0.0) + dt
        world.rule_timers[inst.key] = timer
        if timer + 1e-12 < rule.min_duration:
            continue
        if spent & set(inst.inputs) or inst.machine in spent:
            continue
        try:
            outputs = apply_rule(world, kb, inst)
        except StaleRuleError:
            continue
        spent.update(inst.inputs)
        world.rule_timers.pop(inst.key, None)
        fired.append((inst.rule_id, outputs))
    for key in [k for k in world.rule_timers if k not in seen]:
        del world.rule_timers[key]
    return fired


def _covering(world: WorldState, target: str, synset: str) -> np.ndarray:
    sys = world.substances[synset]
    if not len(sys):
        return np.zeros(0, dtype=int)
    if sys.kind == "visualSubstance":
        return np.array([i for i, w in enumerate(sys.owners) if w == target], dtype=int)
    near = points_box_distance(sys.positions, world.box(target)) <= world.physics.contact_eps
    return np.nonzero(near & sys.free_mask())[0]


def cleaning_allowed(world: WorldState, kb: KnowledgeBase, remover: str, substance: str) -> bool:
    rule = kb.cleaning_rule_for(substance)
    if rule is None:
        return True
    r = world.obj(remover)
    if rule.removers and not any(kb.is_a(r.synset, s) for s in rule.removers):
        return False
    if rule.saturated_with:
        need = kb.param(r.synset, "soaked_threshold")
        return any(level >= need and any(kb.is_a(liq, s) for s in rule.saturated_with)
                   for liq, level in r.soaked.items())
    return True


def apply_cleaning(world: WorldState, kb: KnowledgeBase, remover: str, target: str,
                   footprint: Optional[Sequence[float]] = None) -> Dict[str, int]:
    """Remove covering particles from ``target`` where the cleaning gate allows it.

    ``footprint`` is an (xmin, ymin, xmax, ymax) wiping area; without it the
    remover must touch the target and its own footprint is used.
    """
    r = world.obj(remover)
    if "particleRemover" not in kb.properties(r.synset):
        raise CleaningError(f"{remover} is not a particle remover")
    if not world.obj(target).spatial:
        raise WorldError(f"{target} is not real")
    if footprint is None:
        if not world.in_contact(remover, target):
            raise CleaningError(f"{remover} does not touch {target}")
        rb = r.box
        footprint = (rb[0], rb[1], rb[3], rb[4])
    x0, y0, x1, y1 = footprint
    removed: Dict[str, int] = {}
    for syn in sorted(world.substances):
        idx = _covering(world, target, syn)
        if not len(idx) or not cleaning_allowed(world, kb, remover, syn):
            continue
        pts = world.substances[syn].positions[idx]
        inside = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        n = world.substances[syn].delete(idx[inside])
        if n:
            removed[syn] = n
    world.invalidate()
    return removed
