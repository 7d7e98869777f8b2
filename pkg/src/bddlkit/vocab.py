"""Canonical predicate names, BDDL aliases, and argument signatures."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

# Argument kinds.
OBJ = "object"        # non-substance instance (agent included)
SUB = "substance"     # substance instance
ANY = "any"
ROOM = "room"         # bare room-type token (inroom only)


@dataclass(frozen=True)
class Signature:
    name: str
    kinds: tuple  # argument kinds; a trailing "*" entry means variadic
    group: str  # kinematic | state | substance | agent | meta
    goal_ok: bool = True
    init_ok: bool = True

    @property
    def variadic(self) -> bool:
        return bool(self.kinds) and self.kinds[-1] == "*"

    def arity_ok(self, n: int) -> bool:
        if self.variadic:
            return n >= len(self.kinds) - 1
        return n == len(self.kinds)

    def kind_at(self, i: int) -> str:
        if self.variadic and i >= len(self.kinds) - 2:
            return self.kinds[-2]
        return self.kinds[i]


SIGNATURES = {s.name: s for s in [
    Signature("InsideOf", (OBJ, OBJ), "kinematic"),
    Signature("OnTopOf", (OBJ, OBJ), "kinematic"),
    Signature("NextTo", (OBJ, OBJ), "kinematic"),
    Signature("Under", (OBJ, OBJ), "kinematic"),
    Signature("OnFloor", (OBJ, OBJ), "kinematic"),
    Signature("InContactWith", (OBJ, OBJ), "kinematic"),
    Signature("ConnectedWith", (OBJ, OBJ), "kinematic"),
    Signature("Hung", (OBJ, OBJ), "kinematic"),
    Signature("Open", (OBJ,), "state"),
    Signature("Closed", (OBJ,), "state"),
    Signature("Cooked", (OBJ,), "state"),
    Signature("Burnt", (OBJ,), "state"),
    Signature("Frozen", (OBJ,), "state"),
    Signature("Heated", (OBJ,), "state"),
    Signature("OnFire", (OBJ,), "state"),
    Signature("Boiled", (SUB,), "state"),
    Signature("ToggledOn", (OBJ,), "state"),
    Signature("Sliced", (OBJ,), "state"),
    Signature("Broken", (OBJ,), "state"),
    Signature("Folded", (OBJ,), "state"),
    Signature("Unfolded", (OBJ,), "state"),
    Signature("Assembled", (OBJ,), "state"),
    Signature("Blended", (ANY, ANY, "*"), "state"),
    Signature("Soaked", (OBJ, SUB), "substance"),
    Signature("Filled", (OBJ, SUB), "substance"),
    Signature("Empty", (OBJ, SUB), "substance"),
    Signature("Covered", (OBJ, SUB), "substance"),
    Signature("InSource", (OBJ, SUB), "substance", goal_ok=False),
    Signature("InReachOfAgent", (OBJ,), "agent"),
    Signature("InSameRoomAsAgent", (OBJ,), "agent"),
    Signature("InFoVOfAgent", (OBJ,), "agent"),
    Signature("InHandOfAgent", (OBJ,), "agent"),
    Signature("InRoom", (OBJ, ROOM), "meta", goal_ok=False),
    Signature("Future", (ANY,), "meta", goal_ok=False),
    Signature("Real", (ANY,), "meta", init_ok=False),
]}

# BDDL surface names -> canonical names.  Canonical names are accepted verbatim too.
ALIASES = {
    "inside": "InsideOf",
    "ontop": "OnTopOf",
    "nextto": "NextTo",
    "under": "Under",
    "onfloor": "OnFloor",
    "touching": "InContactWith",
    "attached": "ConnectedWith",
    "connected": "ConnectedWith",
    "hung": "Hung",
    "draped": "Hung",
    "open": "Open",
    "closed": "Closed",
    "cooked": "Cooked",
    "burnt": "Burnt",
    "frozen": "Frozen",
    "hot": "Heated",
    "heated": "Heated",
    "on_fire": "OnFire",
    "onfire": "OnFire",
    "boiled": "Boiled",
    "toggled_on": "ToggledOn",
    "sliced": "Sliced",
    "broken": "Broken",
    "folded": "Folded",
    "unfolded": "Unfolded",
    "assembled": "Assembled",
    "blended": "Blended",
    "soaked": "Soaked",
    "saturated": "Soaked",
    "filled": "Filled",
    "empty": "Empty",
    "covered": "Covered",
    "insource": "InSource",
    "inreachofagent": "InReachOfAgent",
    "insameroomasagent": "InSameRoomAsAgent",
    "infovofagent": "InFoVOfAgent",
    "inhandofagent": "InHandOfAgent",
    "inroom": "InRoom",
    "future": "Future",
    "real": "Real",
}

# Surface name emitted by the serializer for each canonical predicate.
SURFACE = {}
for _alias, _canon in ALIASES.items():
    SURFACE.setdefault(_canon, _alias)

# Three-valued pairs: a negated member is rewritten to its partner.
COMPLEMENT = {
    "Filled": "Empty", "Empty": "Filled",
    "Open": "Closed", "Closed": "Open",
    "Folded": "Unfolded", "Unfolded": "Folded",
}

# Binary predicates whose canonical order is (object, substance).
OBJECT_SUBSTANCE = frozenset({"Filled", "Empty", "Covered", "Soaked", "InSource"})


def canonical_name(name: str) -> Optional[str]:
    """Canonical predicate for a surface or canonical name, or None if unknown."""
    if name in SIGNATURES:
        return name
    return ALIASES.get(name.lower())


def signature(name: str) -> Signature:
    canon = canonical_name(name)
    if canon is None:
        raise KeyError(f"unknown predicate {name!r}")
    return SIGNATURES[canon]
