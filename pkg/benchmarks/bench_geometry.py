"""Compare the compiled and pure-Python geometry kernels.

    python benchmarks/bench_geometry.py [--repeat N]

Kernel timings call both modules directly.  The end-to-end row runs the
kinematic predicate workload in two subprocesses, one with
BDDLKIT_PURE_PYTHON=1, so the whole package picks up each backend.
"""
import argparse
import os
import random
import subprocess
import sys
import timeit

from bddlkit import _geom_py

try:
    from bddlkit import _geom as _geom_c
except ImportError:
    _geom_c = None

WORKLOAD = r"""
import time
import numpy as np
from bddlkit import geometry, predicates as P
from bddlkit.kb import default_kb
from bddlkit.world import load_scene

kb = default_kb()
rng = np.random.default_rng(0)
objs = [{"id": f"o{i}", "synset": "apple.n.01",
         "position": [float(rng.uniform(0.5, 5.5)), float(rng.uniform(0.5, 5.5)), 0.04]} for i in range(12)]
doc = {"rooms": [{"id": "r", "type": "kitchen", "rects": [[0, 0, 6, 6]]}], "objects": objs,
       "agent": {"position": [0.2, 0.2]}}
w = load_scene(doc, kb)
t0 = time.perf_counter()
for _ in range(20):
    w.invalidate()
    for a in objs:
        for b in objs:
            if a is not b:
                for pred in ("InsideOf", "OnTopOf", "Under", "NextTo"):
                    P.check(w, kb, (pred, (a["id"], b["id"])))
print(geometry.BACKEND, time.perf_counter() - t0)
"""


def random_box(rng):
    x, y, z = rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 2)
    return (x, y, z, x + rng.uniform(0.05, 1), y + rng.uniform(0.05, 1), z + rng.uniform(0.05, 1))


def cases(rng):
    boxes = [random_box(rng) for _ in range(64)]
    points = [(rng.uniform(0, 6), rng.uniform(0, 6), rng.uniform(0, 3)) for _ in range(4000)]
    box = boxes[0]
    return {
        "ray_cast (64 boxes)": lambda m: m.ray_cast((3.0, 3.0, 1.0), (1.0, 0.2, 0.0), boxes),
        "first_overlap (64 boxes)": lambda m: m.first_overlap(box, boxes[1:], 1e-6),
        "box_distance": lambda m: m.box_distance(boxes[1], boxes[2]),
        "count_in_box (4000 pts)": lambda m: m.count_in_box(points, box),
        "indices_near_box (4000 pts)": lambda m: m.indices_near_box(points, box, 0.05),
    }


def time_call(fn, repeat):
    timer = timeit.Timer(fn)
    n, _ = timer.autorange()
    return min(timer.repeat(repeat, n)) / n


def end_to_end():
    here = os.path.dirname(os.path.abspath(__file__))
    out = {}
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("BDDLKIT_PURE_PYTHON", None)
        if pure:
            env["BDDLKIT_PURE_PYTHON"] = "1"
        res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, cwd=here,
                             capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = random.Random(0)
    mods = [("python", _geom_py)] + ([("cython", _geom_c)] if _geom_c else [])
    if _geom_c is None:
        print("compiled extension not built; timing the Python kernels only")
    print(f"{'kernel':32s}" + "".join(f"{name:>14s}" for name, _ in mods) + ("       speedup" if _geom_c else ""))
    for label, fn in cases(rng).items():
        ts = [time_call(lambda m=m: fn(m), args.repeat) for _, m in mods]
        row = f"{label:32s}" + "".join(f"{t * 1e6:12.2f}us" for t in ts)
        if len(ts) == 2:
            row += f"{ts[0] / ts[1]:13.1f}x"
        print(row)
    e2e = end_to_end()
    cells = "".join(f"{e2e[name] * 1e3:12.1f}ms" for name, _ in mods if name in e2e)
    row = f"{'kinematic checks (end to end)':32s}" + cells
    if "cython" in e2e and "python" in e2e:
        row += f"{e2e['python'] / e2e['cython']:13.1f}x"
    print(row)


if __name__ == "__main__":
    main()
