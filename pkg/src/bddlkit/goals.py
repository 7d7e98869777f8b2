"""Goal satisfaction and the success score Q.

Q is the satisfied fraction of leaf literals under the quantifier grounding
that maximizes that fraction.  Each subformula is summarized as a map
``total leaves -> most leaves satisfiable with that total``; conjunction and
universal quantification combine maps by max-plus convolution, disjunction
and existential quantification by a per-total max.
"""
from __future__ import annotations

from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Sequence, Tuple

from bddlkit.logic import And, Atom, Exists, ForAll, ForNPairs, Formula, Imply, Not, Or, is_var, normalize
from bddlkit.matching import matching_size

Profile = Dict[int, int]
AtomFn = Callable[[str, Tuple[str, ...]], bool]
DomainFn = Callable[[str], Sequence[str]]

ENUMERATION_CAP = 10_000


class GoalError(ValueError):
    pass


def _resolve(args: Sequence[str], env: Mapping[str, str]) -> Tuple[str, ...]:
    out = []
    for a in args:
        if is_var(a):
            if a not in env:
                raise GoalError(f"unbound variable {a}")
            out.append(env[a])
        else:
            out.append(a)
    return tuple(out)


class Evaluator:
    """Evaluates normalized goal formulas against an atom oracle.

    ``atom_fn(pred, args)`` gives the truth of a ground atom and
    ``domain_fn(synset)`` the entities a quantifier ranges over.
    """

    def __init__(self, atom_fn: AtomFn, domain_fn: DomainFn):
        self._atom_fn = atom_fn
        self._domain_fn = domain_fn
        self._cache: Dict[Tuple[str, Tuple[str, ...]], bool] = {}
        self._domains: Dict[str, Tuple[str, ...]] = {}

    def atom(self, pred: str, args: Tuple[str, ...]) -> bool:
        key = (pred, args)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = bool(self._atom_fn(pred, args))
        return hit

    def domain(self, synset: str) -> Tuple[str, ...]:
        d = self._domains.get(synset)
        if d is None:
            d = self._domains[synset] = tuple(self._domain_fn(synset))
        return d

    # ------------------------------------------------------------ truth

    def truth(self, f: Formula, env: Mapping[str, str] = None) -> bool:
        env = env or {}
        if isinstance(f, Atom):
            return self.atom(f.pred, _resolve(f.args, env))
        if isinstance(f, Not):
            return not self.truth(f.child, env)
        if isinstance(f, And):
            return all(self.truth(c, env) for c in f.children)
        if isinstance(f, Or):
            return any(self.truth(c, env) for c in f.children)
        if isinstance(f, Imply):
            return not self.truth(f.antecedent, env) or self.truth(f.consequent, env)
        if isinstance(f, ForAll):
            return all(self.truth(f.body, {**env, f.var: x}) for x in self.domain(f.synset))
        if isinstance(f, Exists):
            return any(self.truth(f.body, {**env, f.var: x}) for x in self.domain(f.synset))
        if isinstance(f, ForNPairs):
            return self.pairs(f, env) >= f.n
        raise TypeError(f"not a formula: {f!r}")

    def pairs(self, f: ForNPairs, env: Mapping[str, str]) -> int:
        left, right = self.domain(f.synset1), self.domain(f.synset2)
        return matching_size(left, right,
                             lambda a, b: a != b and self.truth(f.body, {**env, f.var1: a, f.var2: b}))

    # ------------------------------------------------------------ score

    def profile(self, f: Formula, env: Mapping[str, str] = None) -> Profile:
        env = env or {}
        if isinstance(f, (Atom, Not, ForNPairs)):
            return {1: int(self.truth(f, env))}
        if isinstance(f, And):
            return _conjoin(self.profile(c, env) for c in f.children)
        if isinstance(f, Or):
            return _disjoin(self.profile(c, env) for c in f.children)
        if isinstance(f, Imply):
            return self.profile(normalize(f), env)
        if isinstance(f, ForAll):
            return _conjoin(self.profile(f.body, {**env, f.var: x}) for x in self.domain(f.synset))
        if isinstance(f, Exists):
            dom = self.domain(f.synset)
            if not dom:
                return {1: 0}
            return _disjoin(self.profile(f.body, {**env, f.var: x}) for x in dom)
        raise TypeError(f"not a formula: {f!r}")

    def score(self, f: Formula) -> float:
        return q_from_profile(self.profile(f))

    def evaluate(self, f: Formula) -> Tuple[bool, float]:
        return self.truth(f), self.score(f)


def _conjoin(profiles: Iterable[Profile]) -> Profile:
    acc: Profile = {0: 0}
    for p in profiles:
        if len(acc) * len(p) > ENUMERATION_CAP:
            # Greedy beyond the cap: keep only each side's best-fraction entry.
            acc, p = _best(acc), _best(p)
        out: Profile = {}
        for t1, s1 in acc.items():
            for t2, s2 in p.items():
                t, s = t1 + t2, s1 + s2
                if s > out.get(t, -1):
                    out[t] = s
        acc = out
    return acc


def _disjoin(profiles: Iterable[Profile]) -> Profile:
    out: Profile = {}
    for p in profiles:
        for t, s in p.items():
            if s > out.get(t, -1):
                out[t] = s
    return out or {1: 0}


def _best(p: Profile) -> Profile:
    t = max(p, key=lambda k: (_frac(k, p[k]), p[k], -k))
    return {t: p[t]}


def _frac(total: int, sat: int) -> float:
    return 1.0 if total == 0 else sat / total


def q_from_profile(p: Profile) -> float:
    return max(_frac(t, s) for t, s in p.items())


def evaluate(f: Formula, atom_fn: AtomFn, domain_fn: DomainFn) -> Tuple[bool, float]:
    """(satisfied, Q) for a goal formula; the formula is normalized first."""
    return Evaluator(atom_fn, domain_fn).evaluate(normalize(f))
