import json

import pytest

from bddlkit import __version__
from bddlkit.cli import main

from conftest import data_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def prob(name):
    return data_path("problems", name + ".bddl")


@pytest.mark.parametrize("name", ["baking_sugar_cookies", "clean_your_laundry_room", "clean_the_bottom_of_an_iron",
                                  "packing_lunch", "serving_hors_doeuvres"])
def test_validate_corpus(capsys, name):
    code, out, _ = run(capsys, "validate", prob(name))
    doc = json.loads(out)
    assert code == 0 and doc["errors"] == 0 and doc["problem"]


def test_validate_errors(capsys, tmp_path):
    bad = tmp_path / "bad.bddl"
    bad.write_text("(define (problem x)\n  (:domain omnigibson)\n  (:objects a.n.01_1 - apple.n.01)\n")
    code, out, _ = run(capsys, "validate", str(bad))
    doc = json.loads(out)
    assert code == 1 and doc["diagnostics"][0]["code"] == "parse"
    unknown = tmp_path / "unknown.bddl"
    unknown.write_text(open(prob("make_strawberry_slushie")).read().replace("- blender.n.01", "- blendr.n.01"))
    code, out, _ = run(capsys, "validate", str(unknown))
    assert code == 1 and json.loads(out)["errors"] >= 1


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "validate", str(tmp_path / "missing.bddl"))[0] == 2
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and "bddlkit:" in err
    assert run(capsys, "sample", prob("clean_table"))[0] == 2  # --scene is required
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and __version__ in capsys.readouterr().out


def test_sample_is_deterministic(capsys, tmp_path):
    args = ["sample", prob("clean_table"), "--scene", data_path("scenes", "restaurant.json")]
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    assert main(["--out", str(a)] + args + ["--seed", "3"]) == 0
    assert main(["--out", str(b)] + args + ["--seed", "3"]) == 0
    assert main(["--out", str(c)] + args + ["--seed", "4"]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema"] == "bddlkit.sample/1" and doc["problem"] == "clean_table-0"


def test_sample_failure(capsys):
    code, out, _ = run(capsys, "sample", prob("clean_table"), "--scene", data_path("scenes", "laundry_room.json"))
    doc = json.loads(out)
    assert code == 1 and "no room of type" in doc["error"]


def sample_file(capsys, tmp_path, problem, scene):
    path = tmp_path / f"{problem}.sample.json"
    assert main(["--out", str(path), "sample", prob(problem), "--scene", data_path("scenes", scene + ".json")]) == 0
    capsys.readouterr()
    return str(path)


def test_run_single_and_batch(capsys, tmp_path):
    world = sample_file(capsys, tmp_path, "clean_table", "restaurant")
    script = data_path("scripts", "clean_table.json")
    code, out, _ = run(capsys, "run", world, prob("clean_table"), "--script", script)
    rep = json.loads(out)
    assert code == 0 and rep["success"] and rep["primitive_count"] == 6
    outs = []
    for threads in ("1", "4", "4"):
        code, out, _ = run(capsys, "run", world, prob("clean_table"), "--script", script,
                           "--episodes", "4", "--threads", threads, "--seed", "9")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]
    batch = json.loads(outs[0])
    assert batch["success_rate"] == 1.0 and [e["seed"] for e in batch["episodes"]] == [9, 10, 11, 12]


def test_run_bad_script(capsys, tmp_path):
    world = sample_file(capsys, tmp_path, "clean_table", "restaurant")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"primitives": [{"kind": "teleport", "target": "x"}]}))
    assert run(capsys, "run", world, prob("clean_table"), "--script", str(bad))[0] == 2


def test_inspect(capsys):
    code, out, _ = run(capsys, "inspect", "predicates")
    rows = {r["name"]: r for r in json.loads(out)["predicates"]}
    assert code == 0 and rows["Open"]["sampleable"] == ["negative", "positive"]
    assert rows["NextTo"]["sampleable"] == []
    code, out, _ = run(capsys, "inspect", "properties", "apple.n.01")
    assert code == 0 and "sliceable" in json.loads(out)["properties"]
    assert run(capsys, "inspect", "properties", "nothing.n.01")[0] == 1
    demo = data_path("worlds", "blender_demo.json")
    code, out, _ = run(capsys, "inspect", "rules", "--dry-run", demo)
    assert [m["rule"] for m in json.loads(out)["matches"]] == ["make_strawberry_slushie"]
    code, out, _ = run(capsys, "inspect", "check", demo, "(inside strawberry.n.01_1 blender.n.01_1)")
    assert code == 0 and json.loads(out)["value"] is True
    code, out, _ = run(capsys, "inspect", "check", demo, "(cooked", "strawberry.n.01_1)")
    assert code == 0 and json.loads(out)["value"] is False
    assert run(capsys, "inspect", "check", demo, "(levitating x)")[0] == 2
