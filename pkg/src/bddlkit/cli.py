"""Command-line entry point.

Every command prints one JSON document (sorted keys) on stdout and logs on
stderr.  Exit codes: 0 ok, 1 diagnostics or task failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from bddlkit import __version__
from bddlkit import predicates as P
from bddlkit.engine import (DEFAULT_BUDGET, DEFAULT_DT, Grounding, InstantiationError,
                            instantiate_activity, load_script, run_episode)
from bddlkit.kb import KBError, default_kb, infer_properties, load_kb
from bddlkit.parser import ParseError, parse_problem, validate_problem
from bddlkit.transitions import match_rules
from bddlkit.vocab import canonical_name
from bddlkit.world import SceneError, WorldError, load_scene

log = logging.getLogger("bddlkit")

SAMPLE_SCHEMA = "bddlkit.sample/1"
BATCH_SCHEMA = "bddlkit.batch/1"


class UsageError(Exception):
    pass


@dataclass
class CommandResult:
    code: int
    document: dict

    def dumps(self) -> str:
        return json.dumps(self.document, sort_keys=True, indent=1) + "\n"


def _kb(path: Optional[str]):
    if path:
        return load_kb(path)
    return default_kb()


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not JSON: {exc}") from None


def _problem(path: str, kb):
    return parse_problem(_read(path), kb)


# ---------------------------------------------------------------- commands

def cmd_validate(problem: str, kb_path: Optional[str] = None) -> CommandResult:
    kb = _kb(kb_path)
    try:
        defn = _problem(problem, kb)
    except ParseError as exc:
        diag = {"severity": "error", "code": "parse", "message": exc.message, "line": exc.line, "col": exc.col}
        return CommandResult(1, {"problem": None, "diagnostics": [diag], "errors": 1})
    diags = validate_problem(defn, kb)
    errors = sum(d.severity == "error" for d in diags)
    return CommandResult(1 if errors else 0, {"problem": defn.problem_name,
                                              "diagnostics": [d.as_dict() for d in diags],
                                              "errors": errors})


def _sample_doc(defn, world, grounding) -> dict:
    return {"schema": SAMPLE_SCHEMA, "problem": defn.problem_name,
            "grounding": grounding.as_dict(), "world": world.snapshot()}


def cmd_sample(problem: str, scene: str, kb_path: Optional[str] = None, seed: int = 0,
               budget: int = DEFAULT_BUDGET) -> CommandResult:
    kb = _kb(kb_path)
    defn = _problem(problem, kb)
    bad = [d for d in validate_problem(defn, kb) if d.severity == "error"]
    if bad:
        return CommandResult(1, {"error": "invalid problem", "diagnostics": [d.as_dict() for d in bad]})
    doc = _json(scene)
    try:
        world, g = instantiate_activity(defn, doc, kb, seed=seed, budget=budget)
    except InstantiationError as exc:
        return CommandResult(1, {"error": str(exc), "literal": exc.literal, "attempts": exc.attempts})
    return CommandResult(0, _sample_doc(defn, world, g))


def _load_world(doc: dict, kb):
    """A sample document (world + grounding) or a bare world snapshot."""
    if doc.get("schema") == SAMPLE_SCHEMA:
        return load_scene(doc["world"], kb), Grounding.from_dict(doc["grounding"])
    return load_scene(doc, kb), Grounding()


def _episode(world, grounding, defn, script, dt):
    rep = run_episode(world, grounding, defn, script, dt)
    return rep.as_dict()


def cmd_run(world_path: str, problem: str, script_path: str, kb_path: Optional[str] = None,
            dt: float = DEFAULT_DT, episodes: int = 1, threads: int = 1, seed: int = 0) -> CommandResult:
    """Run a script once, or ``episodes`` times with per-episode sampler seeds ``seed + i``."""
    kb = _kb(kb_path)
    defn = _problem(problem, kb)
    try:
        script = load_script(_json(script_path))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad script {script_path}: {exc}") from None
    world, grounding = _load_world(_json(world_path), kb)
    if episodes <= 1:
        rep = _episode(world, grounding, defn, script, dt)
        return CommandResult(0, rep)

    def one(i: int) -> dict:
        w = world.copy()
        w.rng = np.random.default_rng(seed + i)
        rep = _episode(w, grounding, defn, script, dt)
        rep["episode"] = i
        rep["seed"] = seed + i
        return rep

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        reports = list(pool.map(one, range(episodes)))
    n_ok = sum(r["success"] for r in reports)
    return CommandResult(0, {"schema": BATCH_SCHEMA, "episodes": reports, "success_rate": n_ok / episodes})


def _parse_atom(text: str):
    toks = text.replace("(", " ").replace(")", " ").split()
    if not toks:
        raise UsageError("empty atom")
    pred = canonical_name(toks[0])
    if pred is None:
        raise UsageError(f"unknown predicate {toks[0]!r}")
    return pred, tuple(toks[1:])


def cmd_inspect(query: str, kb_path: Optional[str] = None, synset: Optional[str] = None,
                world: Optional[str] = None, atom: Optional[str] = None) -> CommandResult:
    kb = _kb(kb_path)
    if query == "predicates":
        rows = [{"name": n, "arguments": list(s.signature.kinds), "group": s.signature.group,
                 "sampleable": sorted(("positive" if p else "negative") for p in s.polarities)}
                for n, s in sorted(P.REGISTRY.items())]
        return CommandResult(0, {"predicates": rows})
    if query == "properties":
        if synset not in kb:
            return CommandResult(1, {"error": f"unknown synset {synset!r}"})
        return CommandResult(0, {"synset": synset, "properties": sorted(infer_properties(kb, synset))})
    w, g = _load_world(_json(world), kb)
    if query == "rules":
        rows = [{"rule": m.rule_id, "machine": m.machine, "inputs": list(m.inputs)}
                for m in match_rules(w, kb)]
        return CommandResult(0, {"matches": rows})
    pred, args = _parse_atom(atom)
    args = tuple(g.key(a) for a in args)
    try:
        value = P.check(w, kb, (pred, args))
    except P.PredicateError as exc:
        return CommandResult(1, {"error": str(exc)})
    return CommandResult(0, {"atom": [pred, *args], "value": value})


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bddlkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--kb", default=os.environ.get("BDDLKIT_KB"), help="knowledge-base JSON")
    ap.add_argument("--out", help="also write the output document here")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse and validate a problem file")
    p.add_argument("problem")

    p = sub.add_parser("sample", help="instantiate a problem in a scene")
    p.add_argument("problem")
    p.add_argument("--scene", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)

    p = sub.add_parser("run", help="execute a primitive script")
    p.add_argument("world", help="sample document or world snapshot")
    p.add_argument("problem")
    p.add_argument("--script", required=True)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("inspect", help="query the kb or a world")
    q = p.add_subparsers(dest="query", required=True, parser_class=_Parser)
    q.add_parser("predicates")
    r = q.add_parser("properties")
    r.add_argument("synset")
    r = q.add_parser("rules")
    r.add_argument("--dry-run", dest="world", required=True, metavar="WORLD")
    r = q.add_parser("check")
    r.add_argument("world")
    r.add_argument("atom", nargs="+")
    return ap


def dispatch(argv: Sequence[str]) -> CommandResult:
    return _dispatch(build_parser().parse_args(list(argv)))


def _dispatch(args) -> CommandResult:
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return cmd_validate(args.problem, args.kb)
    if args.command == "sample":
        return cmd_sample(args.problem, args.scene, args.kb, args.seed, args.budget)
    if args.command == "run":
        return cmd_run(args.world, args.problem, args.script, args.kb, args.dt,
                       args.episodes, args.threads, args.seed)
    atom = " ".join(args.atom) if getattr(args, "atom", None) else None
    return cmd_inspect(args.query, args.kb, getattr(args, "synset", None),
                       getattr(args, "world", None), atom)


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = None
    try:
        args = build_parser().parse_args(list(argv))
        out = args.out
        res = _dispatch(args)
    except UsageError as exc:
        print(f"bddlkit: {exc}", file=sys.stderr)
        return 2
    except (KBError, SceneError, WorldError, ParseError) as exc:
        res = CommandResult(1, {"error": str(exc)})
    text = res.dumps()
    sys.stdout.write(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return res.code


if __name__ == "__main__":
    sys.exit(main())
