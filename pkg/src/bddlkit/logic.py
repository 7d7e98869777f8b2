"""Goal/init formula trees and negation normalization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple, Union

from bddlkit.vocab import COMPLEMENT


@dataclass(frozen=True)
class Atom:
    """Predicate applied to terms.  Variables keep their leading ``?``."""

    pred: str
    args: Tuple[str, ...]
    loc: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: Tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: Tuple["Formula", ...]


@dataclass(frozen=True)
class Imply:
    antecedent: "Formula"
    consequent: "Formula"


@dataclass(frozen=True)
class ForAll:
    var: str
    synset: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    synset: str
    body: "Formula"


@dataclass(frozen=True)
class ForNPairs:
    n: int
    var1: str
    synset1: str
    var2: str
    synset2: str
    body: "Formula"


Formula = Union[Atom, Not, And, Or, Imply, ForAll, Exists, ForNPairs]
TRUE = And(())


def is_var(term: str) -> bool:
    return term.startswith("?")


def normalize(f: Formula) -> Formula:
    """Push negations to the leaves, then swap negated three-valued atoms.

    ``imply`` is expanded first.  A negated ``for_n_pairs`` has no dual in the
    language and is kept as ``Not(ForNPairs)`` with its body normalized.
    """
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Atom):
        if not neg:
            return f
        partner = COMPLEMENT.get(f.pred)
        if partner is not None:
            return Atom(partner, f.args, f.loc)
        return Not(f)
    if isinstance(f, Not):
        return _nnf(f.child, not neg)
    if isinstance(f, And):
        kids = tuple(_nnf(c, neg) for c in f.children)
        return Or(kids) if neg else And(kids)
    if isinstance(f, Or):
        kids = tuple(_nnf(c, neg) for c in f.children)
        return And(kids) if neg else Or(kids)
    if isinstance(f, Imply):
        return _nnf(Or((Not(f.antecedent), f.consequent)), neg)
    if isinstance(f, ForAll):
        body = _nnf(f.body, neg)
        return Exists(f.var, f.synset, body) if neg else ForAll(f.var, f.synset, body)
    if isinstance(f, Exists):
        body = _nnf(f.body, neg)
        return ForAll(f.var, f.synset, body) if neg else Exists(f.var, f.synset, body)
    if isinstance(f, ForNPairs):
        inner = ForNPairs(f.n, f.var1, f.synset1, f.var2, f.synset2, _nnf(f.body, False))
        return Not(inner) if neg else inner
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> Iterator[Atom]:
    """All atoms in a formula, left to right."""
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.child)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            yield from atoms(c)
    elif isinstance(f, Imply):
        yield from atoms(f.antecedent)
        yield from atoms(f.consequent)
    elif isinstance(f, (ForAll, Exists, ForNPairs)):
        yield from atoms(f.body)


def bindings(f: Formula, scope=None) -> Iterator[Tuple[Atom, dict]]:
    """Atoms paired with the variable -> synset map in scope at that atom."""
    scope = dict(scope or {})
    if isinstance(f, Atom):
        yield f, scope
    elif isinstance(f, Not):
        yield from bindings(f.child, scope)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            yield from bindings(c, scope)
    elif isinstance(f, Imply):
        yield from bindings(f.antecedent, scope)
        yield from bindings(f.consequent, scope)
    elif isinstance(f, (ForAll, Exists)):
        yield from bindings(f.body, {**scope, f.var: f.synset})
    elif isinstance(f, ForNPairs):
        yield from bindings(f.body, {**scope, f.var1: f.synset1, f.var2: f.synset2})


def is_nnf(f: Formula) -> bool:
    if isinstance(f, Atom):
        return True
    if isinstance(f, Not):
        return isinstance(f.child, (Atom, ForNPairs)) and is_nnf(f.child)
    if isinstance(f, (And, Or)):
        return all(is_nnf(c) for c in f.children)
    if isinstance(f, Imply):
        return False
    return is_nnf(f.body)
