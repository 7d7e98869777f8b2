import time

import pytest

from bddlkit.logic import And, Atom, Exists, ForAll, ForNPairs, Not, atoms, is_nnf, normalize
from bddlkit.parser import (ParseError, parse_problem, read_sexpr, serialize_problem, tokenize,
                            validate_problem)

from conftest import problem

CORPUS = ["baking_sugar_cookies", "clean_table", "clean_the_bottom_of_an_iron", "clean_your_laundry_room",
          "collect_trash", "make_strawberry_slushie", "packing_lunch", "serving_hors_doeuvres",
          "store_decoration"]

MINIMAL = """(define (problem p)
  (:domain omnigibson)
  (:objects apple.n.01_1 - apple.n.01 countertop.n.01_1 - countertop.n.01
            water.n.06_1 - water.n.06 agent.n.01_1 - agent.n.01 floor.n.01_1 - floor.n.01)
  (:init (ontop apple.n.01_1 countertop.n.01_1) (inroom countertop.n.01_1 kitchen)
         (inroom floor.n.01_1 kitchen) (onfloor agent.n.01_1 floor.n.01_1) %s)
  (:goal (and %s)))
"""


def minimal(init="", goal="(cooked ?apple.n.01_1)"):
    return MINIMAL % (init, goal)


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_valid_and_round_trips(kb, name):
    d = problem(name, kb)
    assert [x for x in validate_problem(d, kb) if x.severity == "error"] == []
    again = parse_problem(serialize_problem(d), kb)
    assert again == d
    assert is_nnf(normalize(d.goal))


def test_tokenizer_positions():
    toks = list(tokenize("(a\n  ;; comment\n  b)"))
    assert [str(t) for t in toks] == ["(", "a", "b", ")"]
    assert (toks[2].line, toks[2].col) == (3, 3)


@pytest.mark.parametrize("text,fragment", [
    ("(define (problem p)", "unbalanced"),
    ("(define (problem p)))", "unexpected"),
    ("(defin (problem p))", "define"),
])
def test_sexpr_errors(text, fragment):
    with pytest.raises(ParseError) as exc:
        parse_problem(text)
    assert fragment in str(exc.value).lower() or exc.value.line >= 1


def test_error_locations(kb):
    with pytest.raises(ParseError) as exc:
        parse_problem(minimal(init="(frobnicate apple.n.01_1)"), kb)
    assert exc.value.line == 6
    with pytest.raises(ParseError, match="non-conjunctive"):
        parse_problem(minimal(init="(or (cooked apple.n.01_1) (frozen apple.n.01_1))"), kb)
    with pytest.raises(ParseError, match="unbound variable"):
        parse_problem(minimal(goal="(cooked ?x)"), kb)
    with pytest.raises(ParseError, match="for_n_pairs"):
        parse_problem(minimal(goal="(for_n_pairs (0) (?a - apple.n.01) (?b - apple.n.01) (nextto ?a ?b))"), kb)


def codes(kb, text):
    return [d.code for d in validate_problem(parse_problem(text, kb), kb) if d.severity == "error"]


def test_validation_errors(kb):
    assert codes(kb, minimal()) == []
    assert codes(kb, minimal(init="(toggled_on apple.n.01_1)")) == ["inapplicable"]
    assert codes(kb, minimal(init="(ontop apple.n.01_1)")) == ["arity"]
    assert codes(kb, minimal(init="(inroom countertop.n.01_1 moon_base)")) == ["room-type"]
    assert codes(kb, minimal(init="(future apple.n.01_1)")) == ["future"]
    assert set(codes(kb, minimal(init="(not (future apple.n.01_1))"))) == {"future"}
    assert codes(kb, minimal(init="(real apple.n.01_1)")) == ["section"]
    multi = minimal().replace("water.n.06_1 - water.n.06", "water.n.06_1 water.n.06_2 - water.n.06")
    assert codes(kb, multi) == ["substance-multiplicity"]
    two_agents = minimal().replace("agent.n.01_1 - agent.n.01", "agent.n.01_1 agent.n.01_2 - agent.n.01")
    assert codes(kb, two_agents) == ["agent-count"]


def test_argument_order_is_canonical(kb):
    # the older (substance, object) order is swapped with a diagnostic
    d = parse_problem(minimal(init="(filled water.n.06_1 countertop.n.01_1)"), kb)
    lit = [l for l in d.init if l.pred == "Filled"][0]
    assert lit.args == ("countertop.n.01_1", "water.n.06_1")
    assert any(x.code == "argument-order" for x in d.diagnostics)


def test_legacy_dialect(kb):
    d = problem("packing_lunch", kb)
    assert d.legacy
    assert ("water.n.06_1", "water.n.06") in d.objects


def test_listing_structure(kb):
    d = problem("serving_hors_doeuvres", kb)
    assert isinstance(d.goal, And) and all(isinstance(c, Exists) for c in d.goal.children)
    d = problem("packing_lunch", kb)
    assert sum(isinstance(c, ForNPairs) for c in d.goal.children) == 3
    d = problem("baking_sugar_cookies", kb)
    assert len(d.future_instances) == 6
    assert sum(a.pred == "Real" for a in atoms(d.goal)) == 6


def test_normalize_pushes_negations():
    a, b = Atom("Cooked", ("x",)), Atom("OnTopOf", ("x", "y"))
    f = Not(And((a, ForAll("?v", "s", Not(b)))))
    g = normalize(f)
    assert is_nnf(g)
    # three-valued partners swap; others keep a leaf negation
    assert normalize(Not(Atom("Open", ("d",)))) == Atom("Closed", ("d",))
    assert normalize(Not(Atom("Closed", ("d",)))) == Atom("Open", ("d",))
    assert normalize(Not(Not(a))) == a
    assert normalize(Not(ForNPairs(1, "?a", "s", "?b", "t", b))) == Not(ForNPairs(1, "?a", "s", "?b", "t", b))


def test_corpus_under_one_second(kb):
    t = time.perf_counter()
    for name in CORPUS:
        d = problem(name, kb)
        validate_problem(d, kb)
        parse_problem(serialize_problem(d), kb)
        normalize(d.goal)
    assert time.perf_counter() - t < 1.0
