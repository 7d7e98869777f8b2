import numpy as np
import pytest

from bddlkit.goals import ENUMERATION_CAP, Evaluator, GoalError, evaluate
from bddlkit.logic import And, Atom, Exists, ForAll, ForNPairs, Not, Or
from bddlkit.matching import matching_size, max_matching

import oracles as O
from conftest import problem
from fixtures import AbstractWorld, random_goal


def random_bipartite(rng, n=5, m=5):
    left, right = [f"l{i}" for i in range(n)], [f"r{j}" for j in range(m)]
    dens = rng.uniform(0.1, 0.9)
    edges = {(a, b) for a in left for b in right if rng.random() < dens}
    return left, right, lambda a, b: (a, b) in edges


def test_matching_equals_subset_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(200):
        left, right, edge = random_bipartite(rng)
        assert matching_size(left, right, edge) == O.brute_pair_subsets(left, right, edge)


def test_matching_is_valid_and_deterministic():
    rng = np.random.default_rng(3)
    left, right, edge = random_bipartite(rng, 6, 4)
    adj = {a: [b for b in right if edge(a, b)] for a in left}
    m = max_matching(adj)
    assert m == max_matching(adj)
    assert len(set(m.values())) == len(m)
    assert all(edge(a, b) for a, b in m.items())


def test_goal_semantics_match_brute_force():
    for seed in range(500):
        rng = np.random.default_rng(seed)
        w = AbstractWorld(rng)
        f = random_goal(rng)
        ok, q = evaluate(f, w.atom, w.domain)
        assert ok == O.brute_truth(f, w.atom, w.domain)
        assert q == pytest.approx(O.brute_q(f, w.atom, w.domain), abs=1e-12)
        assert ok == (q == 1.0)


def serving_atoms(on):
    def atom(pred, args):
        assert pred == "OnTopOf"
        return args in on
    dom = {"tray.n.01": ["t1", "t2"], "sausage.n.01": ["s1", "s2"], "cherry.n.03": ["c1", "c2"]}
    return atom, dom.__getitem__


def test_serving_hors_doeuvres_score(kb):
    goal = problem("serving_hors_doeuvres", kb).goal
    # Sausages sorted onto t1, only one cherry made it to t2.
    atom, dom = serving_atoms({("s1", "t1"), ("s2", "t1"), ("c1", "t2")})
    assert evaluate(goal, atom, dom) == (False, 7 / 8)
    atom, dom = serving_atoms({("s1", "t1"), ("s2", "t1"), ("c1", "t2"), ("c2", "t2")})
    assert evaluate(goal, atom, dom) == (True, 1.0)
    # Everything on one tray satisfies neither branch fully.
    atom, dom = serving_atoms({("s1", "t1"), ("s2", "t1"), ("c1", "t1"), ("c2", "t1")})
    assert evaluate(goal, atom, dom) == (False, 0.5)


def test_empty_quantifiers():
    atom = lambda p, a: False
    dom = lambda s: []
    body = Atom("p", ("?x",))
    assert evaluate(ForAll("?x", "a.n.01", body), atom, dom) == (True, 1.0)
    assert evaluate(Exists("?x", "a.n.01", body), atom, dom) == (False, 0.0)
    assert evaluate(Or(()), atom, dom) == (False, 0.0)
    assert evaluate(And(()), atom, dom) == (True, 1.0)
    # A vacuous forall next to a false atom contributes no leaves.
    assert evaluate(And((ForAll("?x", "a.n.01", body), Atom("p", ("k",)))), atom, dom) == (False, 0.0)


def test_for_n_pairs_uses_distinct_partners():
    dom = lambda s: ["x1", "x2"]
    f = ForNPairs(2, "?a", "a.n.01", "?b", "a.n.01", Atom("r", ("?a", "?b")))
    # Every pair related, including self pairs: a != b still leaves a 2-matching x1-x2, x2-x1.
    assert evaluate(f, lambda p, a: True, dom) == (True, 1.0)
    only_self = lambda p, a: a[0] == a[1]
    assert evaluate(f, only_self, dom) == (False, 0.0)
    assert evaluate(Not(f), only_self, dom) == (True, 1.0)


def test_unbound_variable():
    with pytest.raises(GoalError, match="unbound"):
        evaluate(Atom("p", ("?x",)), lambda p, a: True, lambda s: [])


def test_atom_oracle_is_cached():
    calls = []
    ev = Evaluator(lambda p, a: calls.append(a) or True, lambda s: ["e1", "e2"])
    f = ForAll("?x", "a.n.01", And((Atom("p", ("?x",)), Atom("p", ("?x",)))))
    assert ev.evaluate(f) == (True, 1.0)
    assert sorted(calls) == [("e1",), ("e2",)]


def test_large_conjunction_stays_bounded():
    # 40 independent binary choices overflow exact enumeration; the greedy fallback still returns a sane Q.
    dom = lambda s: ["x"]
    atom = lambda p, a: a[0] == "good"
    parts = tuple(Or((Atom("p", ("good",)), And((Atom("p", ("bad",)), Atom("p", ("bad",))))))
                  for _ in range(40))
    ok, q = evaluate(And(parts), atom, dom)
    assert ok and q == 1.0
    assert ENUMERATION_CAP >= 10_000
