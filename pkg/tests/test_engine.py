import json
import math

import pytest

from bddlkit import predicates as P
from bddlkit.engine import (EpisodeReport, InstantiationError, Primitive, TraceError, compute_metrics,
                            execute_primitive, instantiate_activity, load_script, run_episode)
from bddlkit.world import load_scene

from conftest import data_path, problem
from fixtures import scripted_episode, scripted_setup


def test_clean_table_optimal_script(kb):
    rep = scripted_episode(kb, "clean_table")
    assert rep.success and rep.q_score == 1.0
    assert rep.primitive_count == 6 and rep.failures == 0
    assert rep.trace[-1]["success"] and not any(r["success"] for r in rep.trace[:-1])


def test_clean_table_needs_every_step(kb):
    _, _, _, script = scripted_setup(kb, "clean_table")
    for i in range(len(script)):
        rep = scripted_episode(kb, "clean_table", lambda s, i=i: s[:i] + s[i + 1:])
        assert not rep.success, f"dropping step {i} still succeeded"


def test_collect_trash_prefix(kb):
    full = scripted_episode(kb, "collect_trash")
    assert full.success and full.primitive_count == 16
    short = scripted_episode(kb, "collect_trash", lambda s: s[:15])
    assert not short.success and short.q_score == 0.75


def test_store_decoration_needs_push(kb):
    rep = scripted_episode(kb, "store_decoration")
    assert rep.success
    assert rep.kin_dis == pytest.approx(0.4)  # the drawer's travel; pumpkins ride in hand
    no_push = scripted_episode(kb, "store_decoration", lambda s: [p for p in s if p.kind != "push"])
    assert not no_push.success
    assert any("is closed" in r["message"] for r in no_push.trace)


def test_success_stops_the_episode(kb):
    rep = scripted_episode(kb, "clean_table", lambda s: s + s)
    assert rep.success and rep.primitive_count == 6


def test_empty_script(kb):
    rep = scripted_episode(kb, "clean_table", lambda s: [])
    assert not rep.success and rep.q_score < 1
    assert (rep.dist_nav, rep.sim_time, rep.kin_dis, rep.primitive_count) == (0, 0, 0, 0)


def test_unknown_target_leaves_world_untouched(kb):
    defn, w, g, _ = scripted_setup(kb, "clean_table")
    before = json.dumps(w.snapshot(), sort_keys=True)
    out = execute_primitive(w, Primitive("pick", "unicorn.n.01_1"), g)
    assert not out.ok and "unknown or non-real" in out.message
    out = execute_primitive(w, Primitive("place", "table.n.02_1", relation="ontop"), g)
    assert not out.ok and out.message == "not holding an object"
    assert json.dumps(w.snapshot(), sort_keys=True) == before


def test_precondition_failures(kb):
    defn, w, g, script = scripted_setup(kb, "collect_trash")
    far = execute_primitive(w, Primitive("pick", "bottle.n.01_1"), g)
    assert not far.ok and "out of reach" in far.message
    assert execute_primitive(w, Primitive("navigate", "bottle.n.01_1"), g).ok
    assert execute_primitive(w, Primitive("pick", "bottle.n.01_1"), g).ok
    cup = execute_primitive(w, Primitive("pick", "cup.n.01_1"), g)
    assert not cup.ok
    fixed = execute_primitive(w, Primitive("wipe", "trash_can.n.01_1"), g)
    assert not fixed.ok and fixed.message == "not holding a particle remover"


def test_failed_steps_count_but_do_not_stop(kb):
    rep = scripted_episode(kb, "clean_table", lambda s: [Primitive("pick", s[1].target)] + s)
    assert rep.success and rep.failures == 1 and rep.primitive_count == 7
    assert rep.trace[0]["ok"] is False and rep.trace[0]["sim_time"] == 0


def test_metrics_rebuild_from_trace(kb):
    for name in ("clean_table", "collect_trash", "store_decoration"):
        rep = scripted_episode(kb, name)
        d, s, k = compute_metrics(rep.trace)
        assert d == pytest.approx(rep.dist_nav) and s == pytest.approx(rep.sim_time)
        assert k == pytest.approx(rep.kin_dis)
        # Cumulative metrics never decrease along the trace.
        for n in range(1, len(rep.trace)):
            a, b = compute_metrics(rep.trace[:n]), compute_metrics(rep.trace[:n + 1])
            assert all(y >= x for x, y in zip(a, b))
    with pytest.raises(TraceError):
        compute_metrics([{"dist_nav": 1.0}])


def test_navigation_costs(kb):
    defn, w, g, _ = scripted_setup(kb, "clean_table")
    x0, y0 = w.agent_position
    out = execute_primitive(w, Primitive("navigate", "table.n.02_1"), g)
    x1, y1 = w.agent_position
    assert out.ok and out.dist_nav == pytest.approx(math.hypot(x1 - x0, y1 - y0))
    assert out.sim_time == pytest.approx(out.dist_nav / 0.5)
    assert P.check(w, kb, ("InReachOfAgent", (g.key("table.n.02_1"),)))


def test_report_document(kb):
    rep = scripted_episode(kb, "clean_table")
    doc = rep.as_dict()
    assert doc["schema"] == "bddlkit.report/1"
    assert set(doc) >= {"success", "q_score", "dist_nav", "sim_time", "kin_dis", "primitive_count", "trace"}
    assert isinstance(rep, EpisodeReport)
    json.dumps(doc)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Primitive("teleport", "x")
    with pytest.raises(ValueError):
        Primitive("place", "x")
    with pytest.raises(ValueError):
        Primitive("push", "x", direction="sideways")
    assert load_script([{"kind": "push", "target": "x"}])[0].direction == "open"


def test_instantiation_is_seeded(kb):
    defn = problem("clean_table", kb)
    scene = data_path("scenes", "restaurant.json")
    a, ga = instantiate_activity(defn, scene, kb, seed=5)
    b, gb = instantiate_activity(defn, scene, kb, seed=5)
    c, _ = instantiate_activity(defn, scene, kb, seed=6)
    assert a.snapshot() == b.snapshot() and ga.as_dict() == gb.as_dict()
    assert a.snapshot() != c.snapshot()
    # The sampled world satisfies every init literal.
    for lit in defn.init:
        assert P.check(a, kb, (lit.pred, tuple(ga.key(x) for x in lit.args))) == lit.positive


def test_missing_room_type(kb):
    defn = problem("clean_table", kb)
    with pytest.raises(InstantiationError, match="no room of type"):
        instantiate_activity(defn, data_path("scenes", "laundry_room.json"), kb)


def test_run_from_snapshot(kb):
    defn, w, g, script = scripted_setup(kb, "clean_table")
    copy = load_scene(w.snapshot(), kb)
    assert run_episode(copy, g, defn, script).as_dict() == run_episode(w, g, defn, script).as_dict()
