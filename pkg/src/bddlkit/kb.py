"""Synset hierarchy, property annotations, parameters and transition rules."""
from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from bddlkit.vocab import SIGNATURES


class KBError(ValueError):
    pass


ANNOTATED = frozenset({
    "assembleable", "breakable", "cloth", "coldSource", "cookable", "fillable",
    "fireSource", "flammable", "heatSource", "liquid", "macroPhysicalSubstance",
    "meltable", "microPhysicalSubstance", "physicalSubstance", "mixingTool",
    "needsOrientation", "openable", "overcookable", "particleApplier",
    "particleRemover", "particleSource", "particleSink", "waterSource",
    "rigidBody", "rope", "sliceable", "slicingTool", "softBody", "toggleable",
    "visualSubstance", "waterCook",
})
# Recomputed on load; values found in a document are discarded.
DERIVED = frozenset({
    "deformable", "diceable", "drapeable", "foldable", "freezable", "heatable",
    "substance", "unfoldable", "soakable",
})
PROPERTIES = ANNOTATED | DERIVED

# Parameter name -> properties any one of which enables it (None: always allowed).
PARAM_PROPERTY: Dict[str, Optional[FrozenSet[str]]] = {
    "cook_temperature": frozenset({"cookable"}),
    "burnt_temperature": frozenset({"cookable"}),
    "heat_source_temperature": frozenset({"heatSource", "fireSource"}),
    "cold_source_temperature": frozenset({"coldSource"}),
    "onfire_temperature": frozenset({"flammable"}),
    "frozen_temperature": frozenset({"freezable"}),
    "heated_temperature": frozenset({"heatable"}),
    "boiling_temperature": frozenset({"liquid"}),
    "slice_force": frozenset({"sliceable"}),
    "break_force": frozenset({"breakable"}),
    "soaked_threshold": frozenset({"soakable"}),
    "filled_threshold": frozenset({"fillable"}),
    "covered_threshold": None,
    "reach_distance": None,
    "fold_threshold": frozenset({"foldable"}),
    "unfold_threshold": frozenset({"unfoldable"}),
}
TEMPERATURE_PARAMS = frozenset(n for n in PARAM_PROPERTY if n.endswith("_temperature"))

DEFAULTS: Dict[str, Optional[float]] = {
    "onfire_temperature": 300.0,
    "frozen_temperature": 0.0,
    "heated_temperature": 75.0,
    "boiling_temperature": 100.0,
    "slice_force": 10.0,
    "break_force": 300.0,
    "soaked_threshold": 50.0,
    "filled_threshold": 0.5,
    "covered_threshold": 50.0,
    "reach_distance": 2.0,
    "cook_temperature": 70.0,
    "burnt_temperature": None,  # never burns unless annotated
    "heat_source_temperature": 200.0,
    "cold_source_temperature": 0.0,
    "fold_threshold": None,
    "unfold_threshold": None,
}

SUBSTANCE_KINDS = ("liquid", "visualSubstance", "microPhysicalSubstance", "macroPhysicalSubstance")


@dataclass(frozen=True)
class TransitionRule:
    rule_id: str
    inputs: Tuple[str, ...]
    machine: str
    outputs: Tuple[str, ...]
    toggled_on: bool = False
    min_temperature: Optional[float] = None
    containment: bool = True
    requires_connected: Optional[str] = None
    consume: Tuple[bool, ...] = ()
    min_duration: float = 0.0

    def consumes(self, i: int) -> bool:
        return self.consume[i] if self.consume else True


@dataclass(frozen=True)
class CleaningRule:
    rule_id: str
    substances: Tuple[str, ...]
    removers: Tuple[str, ...] = ()       # empty: any particleRemover
    saturated_with: Tuple[str, ...] = ()  # empty: dry removal allowed


DEFAULT_CLEANING_RULES = (
    CleaningRule("default_dust", ("dust.n.01",)),
    CleaningRule("default_mold", ("mold.n.05",), saturated_with=("water.n.06",)),
)


@dataclass
class KnowledgeBase:
    parents: Dict[str, Tuple[str, ...]]
    annotated: Dict[str, FrozenSet[str]]          # leaf -> annotated + derived properties
    parameters: Dict[Tuple[str, str], Tuple[str, float]]  # (synset, name) -> (property, value)
    rules: Tuple[TransitionRule, ...] = ()
    cleaning_rules: Tuple[CleaningRule, ...] = ()
    models: Dict[str, dict] = field(default_factory=dict)
    _props_cache: Dict[str, FrozenSet[str]] = field(default_factory=dict, repr=False)
    _anc_cache: Dict[str, FrozenSet[str]] = field(default_factory=dict, repr=False)

    @cached_property
    def children(self) -> Dict[str, Tuple[str, ...]]:
        out: Dict[str, List[str]] = {s: [] for s in self.parents}
        for s, ps in self.parents.items():
            for p in ps:
                out[p].append(s)
        return {s: tuple(sorted(c)) for s, c in out.items()}

    @property
    def synsets(self) -> Tuple[str, ...]:
        return tuple(sorted(self.parents))

    def __contains__(self, synset: str) -> bool:
        return synset in self.parents

    def is_leaf(self, synset: str) -> bool:
        self._require(synset)
        return not self.children[synset]

    def leaves_under(self, synset: str) -> Tuple[str, ...]:
        self._require(synset)
        seen, stack, leaves = set(), [synset], []
        while stack:
            s = stack.pop()
            if s in seen:
                continue
            seen.add(s)
            kids = self.children[s]
            if not kids:
                leaves.append(s)
            stack.extend(kids)
        return tuple(sorted(leaves))

    def ancestors(self, synset: str) -> FrozenSet[str]:
        hit = self._anc_cache.get(synset)
        if hit is not None:
            return hit
        self._require(synset)
        seen, stack = set(), [synset]
        while stack:
            s = stack.pop()
            if s not in seen:
                seen.add(s)
                stack.extend(self.parents.get(s, ()))
        self._anc_cache[synset] = frozenset(seen)
        return self._anc_cache[synset]

    def is_a(self, synset: str, ancestor: str) -> bool:
        """Reflexive descendant test; unknown synsets match only themselves."""
        if synset == ancestor:
            return True
        if synset not in self.parents:
            return False
        return ancestor in self.ancestors(synset)

    def properties(self, synset: str) -> FrozenSet[str]:
        return infer_properties(self, synset)

    def has(self, synset: str, prop: str) -> bool:
        return prop in self.properties(synset)

    def is_substance(self, synset: str) -> bool:
        return synset in self.parents and "substance" in self.properties(synset)

    def substance_kind(self, synset: str) -> Optional[str]:
        props = self.properties(synset)
        if "liquid" in props:
            return "liquid"
        if "visualSubstance" in props:
            return "visualSubstance"
        if "macroPhysicalSubstance" in props:
            return "macroPhysicalSubstance"
        if "microPhysicalSubstance" in props or "physicalSubstance" in props:
            return "microPhysicalSubstance"
        return None

    def param(self, synset: str, name: str):
        """Leaf-level parameter lookup, falling back to the default registry."""
        if name not in PARAM_PROPERTY:
            raise KBError(f"unknown parameter {name!r}")
        if not self.is_leaf(synset):
            raise KBError(f"parameters attach to leaves only; {synset} is not a leaf")
        hit = self.parameters.get((synset, name))
        if hit is not None:
            return hit[1]
        return DEFAULTS.get(name)

    def model(self, synset: str) -> dict:
        return self.models.get(synset, {})

    def cleaning_rule_for(self, substance: str) -> Optional[CleaningRule]:
        for rule in self.cleaning_rules:
            if any(self.is_a(substance, s) for s in rule.substances):
                return rule
        return None

    def _require(self, synset: str) -> None:
        if synset not in self.parents:
            raise KBError(f"unknown synset {synset!r}")


def _derive(props: FrozenSet[str], synset: str, kb_parents: Mapping[str, Tuple[str, ...]],
            annotated: Mapping[str, FrozenSet[str]]) -> FrozenSet[str]:
    p = set(props) - DERIVED
    if "particleSource" in p or "waterSource" in p:
        p |= {"particleSource", "waterSource"}
    if "softBody" in p or "cloth" in p or "rope" in p:
        p.add("deformable")
    if "cloth" in p or "rope" in p:
        p.add("drapeable")
    if "cloth" in p or "softBody" in p:
        p |= {"foldable", "unfoldable"}
    if "rigidBody" in p:
        p |= {"heatable", "freezable"}
    if p & {"liquid", "visualSubstance", "physicalSubstance",
            "microPhysicalSubstance", "macroPhysicalSubstance"}:
        p.add("substance")
    if "particleRemover" in p or "cloth" in p:
        p.add("soakable")
    name = synset.split(".")[0]
    if name.startswith("half__"):
        base = name[len("half__"):] + synset[len(name):]
        if base in annotated and "sliceable" in annotated[base]:
            p.add("diceable")
    return frozenset(p)


def infer_properties(kb: KnowledgeBase, synset: str) -> FrozenSet[str]:
    """Leaf: its annotation.  Non-leaf: intersection over all descendant leaves."""
    cached = kb._props_cache.get(synset)
    if cached is not None:
        return cached
    leaves = kb.leaves_under(synset)
    if leaves == (synset,):
        out = kb.annotated.get(synset, frozenset())
    else:
        out = frozenset.intersection(*(kb.annotated.get(l, frozenset()) for l in leaves))
    kb._props_cache[synset] = out
    return out


_PROP_PREDICATES = {
    "cookable": ("Cooked", "Burnt"),
    "freezable": ("Frozen",),
    "heatable": ("Heated",),
    "flammable": ("OnFire",),
    "toggleable": ("ToggledOn",),
    "sliceable": ("Sliced",),
    "breakable": ("Broken",),
    "openable": ("Open", "Closed"),
    "fillable": ("Filled", "Empty"),
    "foldable": ("Folded",),
    "unfoldable": ("Unfolded",),
    "assembleable": ("Assembled",),
    "soakable": ("Soaked",),
    "particleApplier": ("InSource",),
    "particleSource": ("InSource",),
}
_ALWAYS_OBJECT = ("InsideOf", "OnTopOf", "NextTo", "Under", "OnFloor", "InContactWith",
                  "ConnectedWith", "Hung", "Covered", "InReachOfAgent", "InSameRoomAsAgent",
                  "InFoVOfAgent", "InHandOfAgent", "InRoom", "Blended", "Real", "Future")


def applicable(kb: KnowledgeBase, pred: str, synset: str, position: int) -> bool:
    """Whether ``synset`` may fill argument ``position`` of ``pred``."""
    props = kb.properties(synset)
    sub = "substance" in props
    if pred in ("Real", "Future", "Blended"):
        return True
    sig = SIGNATURES[pred]
    if sig.kind_at(position) == "substance":
        if not sub:
            return False
        if pred in ("Soaked", "Boiled"):
            return "liquid" in props
        return True
    if sub:
        return False
    if pred in _ALWAYS_OBJECT:
        return True
    return any(pred in _PROP_PREDICATES.get(p, ()) for p in props)


def applicable_as_object(kb: KnowledgeBase, pred: str, synset: str, position: int) -> bool:
    """Applicability for a substance synset standing in for a rigid object (older dialect)."""
    if pred in ("Real", "Future", "Blended") or pred in _ALWAYS_OBJECT:
        return True
    props = kb.properties(synset) - {"substance"}
    return any(pred in _PROP_PREDICATES.get(p, ()) for p in props)


def applicable_predicates(kb: KnowledgeBase, synset: str) -> FrozenSet[str]:
    """Predicates that accept ``synset`` in at least one argument position."""
    kb._require(synset)
    out = set()
    for name, sig in SIGNATURES.items():
        n = len(sig.kinds) - (1 if sig.variadic else 0)
        if any(applicable(kb, name, synset, i) for i in range(max(n, 1))):
            out.add(name)
    return frozenset(out)


def _check_acyclic(parents: Mapping[str, Tuple[str, ...]]) -> None:
    state: Dict[str, int] = {}
    for root in sorted(parents):
        if state.get(root):
            continue
        stack = [(root, iter(parents[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                continue
            mark = state.get(nxt, 0)
            if mark == 1:
                raise KBError(f"cycle detected through {nxt!r}")
            if mark == 0:
                state[nxt] = 1
                stack.append((nxt, iter(parents[nxt])))


def _rule_from_doc(doc: dict):
    kind = doc.get("kind", "transition")
    rid = doc["id"]
    if kind == "cleaning":
        return CleaningRule(rid, tuple(doc["substances"]), tuple(doc.get("removers", ())),
                            tuple(doc.get("saturated_with", ())))
    trig = doc.get("trigger", {})
    return TransitionRule(
        rule_id=rid,
        inputs=tuple(doc["inputs"]),
        machine=doc["machine"],
        outputs=tuple(doc["outputs"]),
        toggled_on=bool(trig.get("toggled_on", False)),
        min_temperature=trig.get("min_temperature"),
        containment=bool(trig.get("containment", True)),
        requires_connected=trig.get("requires_connected"),
        consume=tuple(doc.get("consume", ())),
        min_duration=float(doc.get("min_duration", 0.0)),
    )


@functools.lru_cache(maxsize=1)
def _validator():
    import jsonschema

    with resources.files("bddlkit").joinpath("schemas/kb.schema.json").open() as fh:
        schema = json.load(fh)
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    return cls(schema)


def load_kb(document) -> KnowledgeBase:
    """Build a knowledge base from a parsed JSON document (dict) or a path."""
    if isinstance(document, (str, os.PathLike)):
        with open(document, encoding="utf-8") as fh:
            document = json.load(fh)
    import jsonschema

    err = jsonschema.exceptions.best_match(_validator().iter_errors(document))
    if err is not None:
        raise KBError(f"kb schema violation: {err.message}")

    parents: Dict[str, Tuple[str, ...]] = {}
    raw_props: Dict[str, FrozenSet[str]] = {}
    models: Dict[str, dict] = {}
    for entry in document.get("synsets", []):
        sid = entry["id"]
        if sid in parents:
            raise KBError(f"duplicate synset {sid!r}")
        parents[sid] = tuple(entry.get("parents", ()))
        props = frozenset(entry.get("properties", ()))
        unknown = props - PROPERTIES
        if unknown:
            raise KBError(f"unknown property {sorted(unknown)[0]!r} on {sid}")
        raw_props[sid] = props
        if "model" in entry:
            models[sid] = entry["model"]
    for sid, ps in parents.items():
        for p in ps:
            if p not in parents:
                raise KBError(f"{sid} names unknown parent {p!r}")
    _check_acyclic(parents)

    kb = KnowledgeBase(parents=parents, annotated={}, parameters={}, models=models)
    for sid, props in raw_props.items():
        if kb.children[sid] and props - DERIVED:
            raise KBError(f"properties are annotated on leaves only; {sid} has children")
    annotated = {sid: frozenset(props - DERIVED) for sid, props in raw_props.items()
                 if not kb.children[sid]}
    kb.annotated = {sid: _derive(props, sid, parents, annotated) for sid, props in annotated.items()}

    params: Dict[Tuple[str, str], Tuple[str, float]] = {}
    for entry in document.get("parameters", []):
        sid, name, value = entry["synset"], entry["name"], float(entry["value"])
        if sid not in parents:
            raise KBError(f"parameter for unknown synset {sid!r}")
        if kb.children[sid]:
            raise KBError(f"parameter {name} attached to non-leaf {sid}")
        if name not in PARAM_PROPERTY:
            raise KBError(f"unknown parameter {name!r}")
        enabling = PARAM_PROPERTY[name]
        prop = entry.get("property")
        if enabling is not None:
            have = kb.annotated[sid] & enabling
            if not have or (prop is not None and prop not in have):
                raise KBError(f"parameter {name} on {sid} lacks its enabling property")
            prop = prop or sorted(have)[0]
        if name not in TEMPERATURE_PARAMS and value <= 0:
            raise KBError(f"parameter {name} on {sid} must be positive")
        params[(sid, name)] = (prop or "", value)
    for (sid, name), (_, value) in params.items():
        if name == "cook_temperature":
            burnt = params.get((sid, "burnt_temperature"))
            if burnt is not None and not value < burnt[1]:
                raise KBError(f"{sid}: cook_temperature must be below burnt_temperature")
    kb.parameters = params

    rules, cleaning = [], []
    for entry in document.get("transition_rules", []):
        rule = _rule_from_doc(entry)
        if isinstance(rule, CleaningRule):
            for s in rule.substances + rule.removers + rule.saturated_with:
                if s not in parents:
                    raise KBError(f"rule {rule.rule_id} names unknown synset {s!r}")
            cleaning.append(rule)
            continue
        _check_rule(kb, rule)
        rules.append(rule)
    rules.sort(key=lambda r: r.rule_id)
    covered = {s for r in cleaning for s in r.substances}
    for default in DEFAULT_CLEANING_RULES:
        if all(s in parents and s not in covered for s in default.substances):
            cleaning.append(default)
    kb.rules = tuple(rules)
    kb.cleaning_rules = tuple(cleaning)
    return kb


def _check_rule(kb: KnowledgeBase, rule: TransitionRule) -> None:
    if not rule.inputs or not rule.outputs:
        raise KBError(f"rule {rule.rule_id} needs inputs and outputs")
    for s in rule.inputs + rule.outputs + (rule.machine,):
        if s not in kb:
            raise KBError(f"rule {rule.rule_id} names unresolvable synset {s!r}")
    for s in rule.outputs:
        if not kb.leaves_under(s):
            raise KBError(f"rule {rule.rule_id} output {s!r} has no leaf")
    machine = kb.properties(rule.machine)
    if rule.toggled_on and "toggleable" not in machine:
        raise KBError(f"rule {rule.rule_id}: machine {rule.machine} is not toggleable")
    if rule.min_temperature is not None and not machine & {"heatSource", "fireSource"}:
        raise KBError(f"rule {rule.rule_id}: machine {rule.machine} is not a heat source")
    if rule.consume and len(rule.consume) != len(rule.inputs):
        raise KBError(f"rule {rule.rule_id}: consume flags must match inputs")
    if rule.requires_connected is not None and rule.requires_connected not in kb:
        raise KBError(f"rule {rule.rule_id} names unknown synset {rule.requires_connected!r}")


_DEFAULT_KB: Optional[KnowledgeBase] = None


def default_kb_path() -> str:
    return str(resources.files("bddlkit").joinpath("data/kb.json"))


def default_kb() -> KnowledgeBase:
    """The fixture kb shipped with the package (or ``$BDDLKIT_KB``)."""
    global _DEFAULT_KB
    if _DEFAULT_KB is None:
        _DEFAULT_KB = load_kb(os.environ.get("BDDLKIT_KB") or default_kb_path())
    return _DEFAULT_KB
