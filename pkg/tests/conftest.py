import os
import re
from importlib import resources

import pytest

from bddlkit.kb import default_kb
from bddlkit.parser import parse_problem
from bddlkit.world import load_scene

DATA = str(resources.files("bddlkit").joinpath("data"))


def data_path(*parts):
    return os.path.join(DATA, *parts)


def problem(name, kb=None):
    with open(data_path("problems", name + ".bddl"), encoding="utf-8") as fh:
        return parse_problem(fh.read(), kb or default_kb())


def room_world(kb, objects=(), size=(6.0, 6.0), seed=0, agent=(0.5, 0.5), **extra):
    """One-room world with the given object documents."""
    doc = {"rooms": [{"id": "room_0", "type": "kitchen", "rects": [[0, 0, size[0], size[1]]]}],
           "objects": list(objects), "agent": {"position": list(agent)}}
    doc.update(extra)
    return load_scene(doc, kb, seed=seed)


def obj(oid, synset, x, y, z, **kw):
    d = {"id": oid, "synset": synset, "position": [x, y, z]}
    d.update(kw)
    return d


@pytest.fixture(scope="session")
def kb():
    return default_kb()


_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        ok = report.passed and _CRITERIA.get(n, (True,))[0]
        _CRITERIA[n] = (ok, m.group(2).replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
