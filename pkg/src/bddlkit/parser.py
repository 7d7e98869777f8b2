"""BDDL activity definitions: lexing, parsing, serialization and validation."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from bddlkit.logic import (And, Atom, Exists, ForAll, ForNPairs, Formula, Imply, Not, Or,
                           atoms, bindings, is_var)
from bddlkit.vocab import (OBJECT_SUBSTANCE, ROOM, SIGNATURES, SURFACE, canonical_name)

INSTANCE_RE = re.compile(r"^(?P<synset>[A-Za-z0-9_]+\.[a-z]\.[0-9]+)_(?P<index>[1-9][0-9]*)$")
SYNSET_RE = re.compile(r"^[A-Za-z0-9_]+\.[a-z]\.[0-9]+$")

ROOM_TYPES = frozenset({
    "bathroom", "bedroom", "childs_room", "closet", "corridor", "dining_room",
    "empty_room", "exercise_room", "garage", "garden", "home_office", "kitchen",
    "laundry_room", "living_room", "lobby", "office", "playroom", "storage_room",
    "television_room", "utility_room", "break_room", "bar", "restaurant", "shared_office",
})
LEGACY_DOMAINS = frozenset({"igibson"})


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    line: int = 0
    col: int = 0

    def as_dict(self) -> dict:
        return {"severity": self.severity, "code": self.code, "message": self.message,
                "line": self.line, "col": self.col}


@dataclass(frozen=True)
class GroundLiteral:
    pred: str
    args: Tuple[str, ...]
    positive: bool = True
    loc: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)

    @property
    def atom(self) -> Atom:
        return Atom(self.pred, self.args, self.loc)


@dataclass(frozen=True)
class ActivityDefinition:
    problem_name: str
    domain_name: str
    objects: Tuple[Tuple[str, str], ...]
    init: Tuple[GroundLiteral, ...]
    goal: Formula
    diagnostics: Tuple[Diagnostic, ...] = field(default=(), compare=False, repr=False)

    @property
    def legacy(self) -> bool:
        """Older dialect without substances or a declared agent."""
        return self.domain_name in LEGACY_DOMAINS

    def synset_of(self, instance: str) -> str:
        for inst, syn in self.objects:
            if inst == instance:
                return syn
        m = INSTANCE_RE.match(instance)
        if m is None:
            raise KeyError(instance)
        return m.group("synset")

    @property
    def implicit_objects(self) -> Tuple[Tuple[str, str], ...]:
        """Instances referenced in init/goal but missing from ``:objects``."""
        declared = {i for i, _ in self.objects}
        seen: List[str] = []
        for lit in self.init:
            for i, a in enumerate(lit.args):
                if SIGNATURES.get(lit.pred) and SIGNATURES[lit.pred].kind_at(i) == ROOM:
                    continue
                if a not in declared and a not in seen and INSTANCE_RE.match(a):
                    seen.append(a)
        for atom in atoms(self.goal):
            for a in atom.args:
                if not is_var(a) and a not in declared and a not in seen and INSTANCE_RE.match(a):
                    seen.append(a)
        return tuple((i, INSTANCE_RE.match(i).group("synset")) for i in seen)

    @property
    def all_objects(self) -> Tuple[Tuple[str, str], ...]:
        return self.objects + self.implicit_objects

    @property
    def future_instances(self) -> Tuple[str, ...]:
        return tuple(l.args[0] for l in self.init if l.pred == "Future" and l.positive)


# ---------------------------------------------------------------- s-expressions

class Token(str):
    line: int
    col: int


class SList(list):
    line: int = 0
    col: int = 0


def _tok(text: str, line: int, col: int) -> Token:
    t = Token(text)
    t.line, t.col = line, col
    return t


def tokenize(text: str) -> Iterator[Token]:
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
        elif ch.isspace():
            i, col = i + 1, col + 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield _tok(ch, line, col)
            i, col = i + 1, col + 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i, col = i + 1, col + 1
            yield _tok(text[start:i], line, scol)


def read_sexpr(text: str) -> SList:
    """Parse a single top-level s-expression."""
    stack: List[SList] = []
    result: Optional[SList] = None
    for tok in tokenize(text):
        if result is not None:
            raise ParseError("unexpected text after the closing parenthesis", tok.line, tok.col)
        if tok == "(":
            node = SList()
            node.line, node.col = tok.line, tok.col
            if stack:
                stack[-1].append(node)
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", tok.line, tok.col)
            node = stack.pop()
            if not stack:
                result = node
        else:
            if not stack:
                raise ParseError(f"unexpected token {tok!r} outside parentheses", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise ParseError("missing ')' before end of input", stack[-1].line, stack[-1].col)
    if result is None:
        raise ParseError("empty input", 1, 1)
    return result


def _loc(node) -> Tuple[int, int]:
    return (getattr(node, "line", 0), getattr(node, "col", 0))


def _expect_list(node, what: str) -> SList:
    if not isinstance(node, SList):
        raise ParseError(f"expected {what}", *_loc(node))
    return node


# ---------------------------------------------------------------- problem parsing

def parse_problem(text: str, kb=None) -> ActivityDefinition:
    """Parse BDDL problem text.

    ``kb`` is only used to put (object, substance) predicates into canonical
    argument order; the bundled fixture kb is used when it is omitted.
    """
    root = read_sexpr(text)
    if len(root) < 2 or root[0] != "define":
        raise ParseError("expected (define (problem ...) ...)", root.line, root.col)
    head = _expect_list(root[1], "(problem <name>)")
    if len(head) != 2 or head[0] != "problem" or isinstance(head[1], SList):
        raise ParseError("expected (problem <name>)", head.line, head.col)
    name = str(head[1])

    sections: Dict[str, SList] = {}
    for sec in root[2:]:
        sec = _expect_list(sec, "a section")
        if not sec or isinstance(sec[0], SList):
            raise ParseError("empty section", sec.line, sec.col)
        key = str(sec[0])
        if key not in (":domain", ":objects", ":init", ":goal"):
            raise ParseError(f"unknown section {key}", sec.line, sec.col)
        if key in sections:
            raise ParseError(f"duplicate section {key}", sec.line, sec.col)
        sections[key] = sec
    for key in (":domain", ":objects", ":init", ":goal"):
        if key not in sections:
            raise ParseError(f"missing section {key}", root.line, root.col)

    dom = sections[":domain"]
    if len(dom) != 2 or isinstance(dom[1], SList):
        raise ParseError("expected (:domain <name>)", dom.line, dom.col)

    objects = _parse_objects(sections[":objects"])
    declared = {i: s for i, s in objects}
    init = tuple(_parse_init_literal(item) for item in sections[":init"][1:])

    goal_sec = sections[":goal"]
    if len(goal_sec) != 2:
        raise ParseError("(:goal ...) takes exactly one formula", goal_sec.line, goal_sec.col)
    goal = _parse_formula(goal_sec[1], {}, declared)

    diags: List[Diagnostic] = []
    is_sub = _substance_test(kb)
    synset_of = dict(declared)
    for lit in init:
        for a in lit.args:
            m = INSTANCE_RE.match(a)
            if m and a not in synset_of:
                synset_of[a] = m.group("synset")
    init = tuple(_reorder_literal(l, synset_of, is_sub, diags) for l in init)
    goal = _reorder_formula(goal, synset_of, is_sub, diags, {})
    return ActivityDefinition(name, str(dom[1]), tuple(objects), init, goal, tuple(diags))


def _parse_objects(sec: SList) -> List[Tuple[str, str]]:
    out: List[Tuple[str, str]] = []
    seen = set()
    pending: List[Token] = []
    items = list(sec[1:])
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, SList):
            raise ParseError("unexpected list in :objects", tok.line, tok.col)
        if tok == "-":
            if i + 1 >= len(items) or isinstance(items[i + 1], SList):
                raise ParseError("expected a synset after '-'", tok.line, tok.col)
            syn = items[i + 1]
            if not SYNSET_RE.match(syn):
                raise ParseError(f"malformed synset {syn}", syn.line, syn.col)
            if not pending:
                raise ParseError("type without instances", tok.line, tok.col)
            for inst in pending:
                out.append((str(inst), str(syn)))
            pending = []
            i += 2
            continue
        if not INSTANCE_RE.match(tok):
            raise ParseError(f"malformed instance id {tok}", tok.line, tok.col)
        if tok in seen:
            raise ParseError(f"duplicate instance id {tok}", tok.line, tok.col)
        seen.add(str(tok))
        pending.append(tok)
        i += 1
    if pending:
        raise ParseError(f"instances without a type: {' '.join(pending)}", pending[0].line, pending[0].col)
    return out


def _pred_name(tok, node) -> str:
    if isinstance(tok, SList):
        raise ParseError("expected a predicate name", node.line, node.col)
    canon = canonical_name(tok)
    if canon is None:
        raise ParseError(f"unknown predicate {tok}", tok.line, tok.col)
    return canon


def _parse_init_literal(node) -> GroundLiteral:
    node = _expect_list(node, "an init literal")
    if not node:
        raise ParseError("empty literal", node.line, node.col)
    head = node[0]
    if head in ("and", "or", "forall", "exists", "imply", "for_n_pairs"):
        raise ParseError(f"non-conjunctive init: '{head}' is not allowed in :init", node.line, node.col)
    positive = True
    if head == "not":
        if len(node) != 2:
            raise ParseError("(not ...) takes one literal", node.line, node.col)
        inner = _expect_list(node[1], "a literal under not")
        if inner and inner[0] in ("and", "or", "not", "forall", "exists"):
            raise ParseError("non-conjunctive init: only literals may be negated", inner.line, inner.col)
        node, positive = inner, False
        head = node[0]
    pred = _pred_name(head, node)
    args = []
    for a in node[1:]:
        if isinstance(a, SList):
            raise ParseError("nested list in literal", a.line, a.col)
        if a.startswith("?"):
            raise ParseError(f"variable {a} in :init", a.line, a.col)
        args.append(str(a))
    return GroundLiteral(pred, tuple(args), positive, (node.line, node.col))


def _parse_binding(node, what) -> Tuple[str, str]:
    node = _expect_list(node, what)
    if len(node) != 3 or node[1] != "-" or not str(node[0]).startswith("?"):
        raise ParseError(f"expected (?var - synset) in {what}", node.line, node.col)
    return str(node[0]), str(node[2])


def _term(tok, scope, declared) -> str:
    if isinstance(tok, SList):
        raise ParseError("nested list in atom", tok.line, tok.col)
    if tok.startswith("?"):
        if tok in scope:
            return str(tok)
        bare = tok[1:]
        if bare in declared or INSTANCE_RE.match(bare):
            return bare
        raise ParseError(f"unbound variable {tok}", tok.line, tok.col)
    return str(tok)


def _parse_formula(node, scope: Dict[str, str], declared) -> Formula:
    node = _expect_list(node, "a formula")
    if not node:
        raise ParseError("empty formula", node.line, node.col)
    head = node[0]
    if head == "and":
        return And(tuple(_parse_formula(c, scope, declared) for c in node[1:]))
    if head == "or":
        return Or(tuple(_parse_formula(c, scope, declared) for c in node[1:]))
    if head == "not":
        if len(node) != 2:
            raise ParseError("(not ...) takes one formula", node.line, node.col)
        return Not(_parse_formula(node[1], scope, declared))
    if head == "imply":
        if len(node) != 3:
            raise ParseError("(imply a b) takes two formulas", node.line, node.col)
        return Imply(_parse_formula(node[1], scope, declared), _parse_formula(node[2], scope, declared))
    if head in ("forall", "exists"):
        if len(node) != 3:
            raise ParseError(f"({head} (?v - s) body) expected", node.line, node.col)
        var, syn = _parse_binding(node[1], head)
        body = _parse_formula(node[2], {**scope, var: syn}, declared)
        return (ForAll if head == "forall" else Exists)(var, syn, body)
    if head == "for_n_pairs":
        if len(node) != 5:
            raise ParseError("(for_n_pairs (n) (?a - s) (?b - t) body) expected", node.line, node.col)
        n_node = node[1]
        n_tok = n_node[0] if isinstance(n_node, SList) and len(n_node) == 1 else n_node
        if isinstance(n_tok, SList) or not str(n_tok).isdigit() or int(n_tok) < 1:
            raise ParseError("for_n_pairs needs an integer n >= 1", *_loc(n_node))
        v1, s1 = _parse_binding(node[2], "for_n_pairs")
        v2, s2 = _parse_binding(node[3], "for_n_pairs")
        if v1 == v2:
            raise ParseError("for_n_pairs binds two distinct variables", node.line, node.col)
        body = _parse_formula(node[4], {**scope, v1: s1, v2: s2}, declared)
        return ForNPairs(int(n_tok), v1, s1, v2, s2, body)
    pred = _pred_name(head, node)
    return Atom(pred, tuple(_term(t, scope, declared) for t in node[1:]), (node.line, node.col))


def _substance_test(kb) -> Callable[[str], bool]:
    if kb is None:
        from bddlkit.kb import default_kb
        kb = default_kb()
    return lambda s: s in kb and kb.is_substance(s)


def _swap_needed(pred, args, synset_of, is_sub) -> bool:
    if pred not in OBJECT_SUBSTANCE or len(args) != 2:
        return False
    s0, s1 = synset_of.get(args[0]), synset_of.get(args[1])
    if s0 is None or s1 is None:
        return False
    return is_sub(s0) and not is_sub(s1)


def _reorder_literal(lit: GroundLiteral, synset_of, is_sub, diags) -> GroundLiteral:
    if not _swap_needed(lit.pred, lit.args, synset_of, is_sub):
        return lit
    line, col = lit.loc or (0, 0)
    diags.append(Diagnostic("warning", "argument-order",
                            f"{lit.pred}({', '.join(lit.args)}) reordered to (object, substance)", line, col))
    return GroundLiteral(lit.pred, (lit.args[1], lit.args[0]), lit.positive, lit.loc)


def _reorder_formula(f: Formula, synset_of, is_sub, diags, scope) -> Formula:
    if isinstance(f, Atom):
        table = {**synset_of, **scope}
        if not _swap_needed(f.pred, f.args, table, is_sub):
            return f
        line, col = f.loc or (0, 0)
        diags.append(Diagnostic("warning", "argument-order",
                                f"{f.pred}({', '.join(f.args)}) reordered to (object, substance)", line, col))
        return Atom(f.pred, (f.args[1], f.args[0]), f.loc)
    rec = lambda g, sc=scope: _reorder_formula(g, synset_of, is_sub, diags, sc)  # noqa: E731
    if isinstance(f, Not):
        return Not(rec(f.child))
    if isinstance(f, And):
        return And(tuple(rec(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(rec(c) for c in f.children))
    if isinstance(f, Imply):
        return Imply(rec(f.antecedent), rec(f.consequent))
    if isinstance(f, ForAll):
        return ForAll(f.var, f.synset, rec(f.body, {**scope, f.var: f.synset}))
    if isinstance(f, Exists):
        return Exists(f.var, f.synset, rec(f.body, {**scope, f.var: f.synset}))
    if isinstance(f, ForNPairs):
        return ForNPairs(f.n, f.var1, f.synset1, f.var2, f.synset2,
                         rec(f.body, {**scope, f.var1: f.synset1, f.var2: f.synset2}))
    raise TypeError(f)


# ---------------------------------------------------------------- serialization

def _surface(pred: str) -> str:
    return SURFACE.get(pred, pred)


def _literal_text(lit: GroundLiteral) -> str:
    inner = "(" + " ".join((_surface(lit.pred),) + lit.args) + ")"
    return inner if lit.positive else f"(not {inner})"


def _formula_lines(f: Formula, depth: int) -> List[str]:
    pad = "    " * depth
    if isinstance(f, Atom):
        terms = [a if is_var(a) else "?" + a for a in f.args]
        return [pad + "(" + " ".join([_surface(f.pred)] + terms) + ")"]

    def block(head: str, kids: Sequence[Formula], prefix: Sequence[str] = ()) -> List[str]:
        lines = [pad + "(" + head]
        lines += ["    " * (depth + 1) + p for p in prefix]
        for k in kids:
            lines += _formula_lines(k, depth + 1)
        lines.append(pad + ")")
        return lines

    if isinstance(f, Not):
        return block("not", [f.child])
    if isinstance(f, And):
        return block("and", f.children)
    if isinstance(f, Or):
        return block("or", f.children)
    if isinstance(f, Imply):
        return block("imply", [f.antecedent, f.consequent])
    if isinstance(f, (ForAll, Exists)):
        head = "forall" if isinstance(f, ForAll) else "exists"
        return block(head, [f.body], [f"({f.var} - {f.synset})"])
    if isinstance(f, ForNPairs):
        return block("for_n_pairs", [f.body],
                     [f"({f.n})", f"({f.var1} - {f.synset1})", f"({f.var2} - {f.synset2})"])
    raise TypeError(f)


def serialize_problem(defn: ActivityDefinition) -> str:
    lines = [f"(define (problem {defn.problem_name})", f"    (:domain {defn.domain_name})", "",
             "    (:objects"]
    run: List[str] = []
    run_syn = None
    for inst, syn in defn.objects + ((None, None),):
        if syn != run_syn and run:
            lines.append("        " + " ".join(run) + f" - {run_syn}")
            run = []
        run_syn = syn
        if inst is not None:
            run.append(inst)
    lines += ["    )", "", "    (:init"]
    lines += ["        " + _literal_text(l) for l in defn.init]
    lines += ["    )", "", "    (:goal"]
    lines += _formula_lines(defn.goal, 2)
    lines += ["    )", ")", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------- validation

def validate_problem(defn: ActivityDefinition, kb, room_types=ROOM_TYPES) -> List[Diagnostic]:
    """Static checks against a knowledge base.  An empty list means valid."""
    from bddlkit.kb import applicable, applicable_as_object

    diags: List[Diagnostic] = list(defn.diagnostics)

    def err(code, msg, loc=None):
        diags.append(Diagnostic("error", code, msg, *(loc or (0, 0))))

    def warn(code, msg, loc=None):
        diags.append(Diagnostic("warning", code, msg, *(loc or (0, 0))))

    legacy = defn.legacy
    synset_of: Dict[str, str] = {}
    for inst, syn in defn.objects:
        synset_of[inst] = syn
        if INSTANCE_RE.match(inst).group("synset") != syn:
            err("instance-type", f"instance {inst} declared with type {syn}")
        if syn not in kb:
            err("unknown-synset", f"synset {syn} is unknown to the kb")
    for inst, syn in defn.implicit_objects:
        synset_of[inst] = syn
        warn("undeclared-instance", f"{inst} is used but not declared in :objects; assuming {syn}")
        if syn not in kb:
            err("unknown-synset", f"synset {syn} is unknown to the kb")

    def known(s):
        return s in kb

    def is_sub(s):
        return not legacy and known(s) and kb.is_substance(s)

    agents = [i for i, s in defn.objects if known(s) and kb.is_a(s, "agent.n.01")]
    if len(agents) > 1:
        err("agent-count", f"exactly one agent instance expected, found {len(agents)}")
    elif not agents:
        if legacy:
            warn("agent-count", "no agent instance declared; one is assumed")
        else:
            err("agent-count", "exactly one agent instance expected, found 0")

    if not legacy:
        counts = Counter(s for _, s in defn.all_objects if is_sub(s))
        for syn, n in sorted(counts.items()):
            if n > 1:
                err("substance-multiplicity",
                    f"substance multiplicity: {syn} declared {n} times (at most one instance allowed)")

    futures = set()
    for lit in defn.init:
        if lit.pred == "Future":
            if not lit.positive:
                err("future", "future may not be negated", lit.loc)
            for a in lit.args:
                futures.add(a)
                if a not in dict(defn.objects):
                    err("future", f"future instance {a} is not declared in :objects", lit.loc)
    for lit in defn.init:
        if lit.pred == "Future":
            continue
        for a in lit.args:
            if a in futures:
                err("future", f"future instance {a} appears in another init literal", lit.loc)

    def check_atom(pred, args, arg_synsets, loc, section):
        sig = SIGNATURES[pred]
        if section == "init" and not sig.init_ok:
            err("section", f"{pred} may not appear in :init", loc)
        if section == "goal" and not sig.goal_ok:
            err("section", f"{pred} is not goal-evaluable", loc)
        if not sig.arity_ok(len(args)):
            err("arity", f"{pred} takes {len(sig.kinds)} arguments, got {len(args)}", loc)
            return
        for i, (a, syn) in enumerate(zip(args, arg_synsets)):
            kind = sig.kind_at(i)
            if kind == ROOM:
                if a not in room_types:
                    err("room-type", f"room type {a} is unknown to the scene schema", loc)
                continue
            if syn is None:
                err("unknown-instance", f"{a} is not a declared instance", loc)
                continue
            if not known(syn):
                continue
            if legacy and kind != "substance":
                ok = applicable_as_object(kb, pred, syn, i)
            else:
                ok = applicable(kb, pred, syn, i)
            if not ok:
                err("inapplicable", f"{pred} inapplicable to {syn} (argument {i + 1})", loc)

    for lit in defn.init:
        check_atom(lit.pred, lit.args, [synset_of.get(a) for a in lit.args], lit.loc, "init")
    for atom, scope in bindings(defn.goal):
        arg_syn = [scope.get(a) if is_var(a) else synset_of.get(a) for a in atom.args]
        check_atom(atom.pred, atom.args, arg_syn, atom.loc, "goal")
    return diags
