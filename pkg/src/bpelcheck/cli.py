"""Command-line front end: translate, verify, dump-tree, export-smt, policy-check.

Exit codes are a stable contract:

=====  =====================================================
0      success; for ``verify`` the goal is unreachable
2      BPEL parse error (``translate``)
3      workflow validation error (``translate``)
10     ``verify``: the goal is reachable
11     unreadable or malformed input (files, policy, goal)
12     workflow or binding validation error
13     node budget exhausted
14     grounding budget exhausted
15     external solver failure or cross-check mismatch
16     ``verify``: inconclusive (depth limit reached first)
=====  =====================================================
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import __version__
from .bpel import bpel_to_net
from .engine import (Goal, SymbolicTree, TwoLevelSystem, Timer, build_system, dumps_report,
                     explore, report, search, soundness_goal, tree_to_dot)
from .errors import (BpelCheckError, BpelError, FormulaSyntax, GroundingBudgetExceeded,
                     NetError, NodeBudgetExceeded, PolicyError, SolverError, UnboundAction)
from .rbac.ground import bsr_sat
from .rbac.logic import BSR_TRUE
from .rbac.policy import load_policy
from .rbac.syntax import format_bsr, parse_goal
from .smt import SolverConfig, emit_bsr, emit_la, run_solver
from .vas import la_sat
from .wfnet import dumps_net, net_from_dict, validate_wf_net

log = logging.getLogger("bpelcheck")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_REACHABLE = 10
EXIT_INPUT = 11
EXIT_INVALID = 12
EXIT_NODE_BUDGET = 13
EXIT_GROUNDING = 14
EXIT_SOLVER = 15
EXIT_INCONCLUSIVE = 16


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Inputs:
    system: TwoLevelSystem
    goal: Optional[Goal]
    goal_doc: Optional[dict]


# -- input handling ----------------------------------------------------------------

def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_workflow(path: str, strict: bool):
    """A BPEL document or a net JSON document; returns ``(net, m0 or None)``."""
    text = _read(path)
    if text.lstrip().startswith("<"):
        return bpel_to_net(text, strict=strict), None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{path}: neither BPEL nor net JSON ({exc})") from exc
    return net_from_dict(doc)


def _goal_doc(args) -> Optional[dict]:
    if args.soundness:
        if args.goal or args.goal_vas or args.goal_pm:
            raise CliError(EXIT_INPUT, "--soundness cannot be combined with other goal options")
        return None
    doc: dict = {}
    if args.goal:
        text = _read(args.goal) if os.path.exists(args.goal) else args.goal
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_INPUT, f"goal is neither a file nor JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise CliError(EXIT_INPUT, "a goal document is a JSON object")
    if args.goal_vas:
        doc["vas"] = args.goal_vas
    if args.goal_pm:
        doc["pm"] = args.goal_pm
    if not doc:
        raise CliError(EXIT_INPUT, "give a goal (--goal, --goal-vas, --goal-pm) or --soundness")
    return doc


def _inputs(args, need_goal: bool = True) -> Inputs:
    strict = not args.lenient
    try:
        net, m0 = _load_workflow(args.workflow, strict)
        policy = load_policy(_read(args.policy))
    except (BpelError, PolicyError, FormulaSyntax) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    except NetError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from exc
    try:
        system = build_system(net, policy, m0, strict=strict)
    except (NetError, UnboundAction) as exc:
        raise CliError(EXIT_INVALID, str(exc)) from exc
    except PolicyError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    if not need_goal:
        return Inputs(system, None, None)
    doc = _goal_doc(args)
    if doc is None:
        return Inputs(system, soundness_goal(system), None)
    try:
        la, pm = parse_goal(doc, system.vas.vars, system.policy)
    except (FormulaSyntax, PolicyError) as exc:
        raise CliError(EXIT_INPUT, f"goal: {exc}") from exc
    return Inputs(system, Goal(la, pm), doc)


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot write {path}: {exc.strerror or exc}") from exc


def _solver_config(args) -> SolverConfig:
    return SolverConfig(path=args.solver_path, timeout_ms=args.solver_timeout_ms)


# -- subcommands ---------------------------------------------------------------------

def cmd_translate(args) -> int:
    text = _read(args.bpel)
    try:
        net = bpel_to_net(text, strict=not args.lenient)
    except BpelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        validate_wf_net(net, require_acyclic=True)
    except NetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _write(args.out, dumps_net(net))
    return EXIT_OK


def _cross_check(system: TwoLevelSystem, tree: SymbolicTree, goal: Goal, config: SolverConfig,
                 limit: int) -> dict:
    """Re-decide each node's goal obligations with the external solver."""
    out = {"jobs": 0, "agree": 0, "unknown": 0, "mismatches": []}
    for node in tree.nodes[:limit]:
        la = node.vas & goal.vas
        la_expected = "sat" if la_sat(la)[0] else "unsat"
        jobs = [("vas", emit_la(la, la_expected))]
        if la_expected == "sat" or goal.pm != BSR_TRUE:
            k = node.pm & goal.pm
            expected = "sat" if bsr_sat(k, system.policy).sat else "unsat"
            jobs.append(("pm", emit_bsr(k, system.policy, expected)))
        for part, job in jobs:
            got = run_solver(job, config)
            out["jobs"] += 1
            if got == "unknown":
                out["unknown"] += 1
            elif got == job.expected:
                out["agree"] += 1
            else:
                out["mismatches"].append({"node": node.id, "part": part,
                                          "internal": job.expected, "solver": got})
    return out


def cmd_verify(args) -> int:
    inp = _inputs(args)
    with Timer() as timer:
        verdict, tree = search(inp.system, inp.goal, max_depth=args.depth,
                               node_budget=args.node_budget,
                               grounding_budget=args.grounding_budget,
                               subsume=args.subsume, count_all=args.count_all_vars)
    doc = report(verdict, inp.system, elapsed=None if args.no_timing else timer.elapsed)
    doc["goal"] = ({"soundness": True} if inp.goal_doc is None else
                   {"vas": inp.goal.vas.text(), "pm": format_bsr(inp.goal.pm)})
    code = {"reachable": EXIT_REACHABLE, "unreachable": EXIT_OK,
            "inconclusive": EXIT_INCONCLUSIVE}[verdict.status]
    if args.cross_check:
        doc["cross_check"] = _cross_check(inp.system, tree, inp.goal, _solver_config(args),
                                          args.cross_check_limit)
        if doc["cross_check"]["mismatches"]:
            code = EXIT_SOLVER
    if args.dot:
        _write(args.dot, tree_to_dot(inp.system, tree))
    text = dumps_report(doc)
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)
    return code


def cmd_dump_tree(args) -> int:
    inp = _inputs(args, need_goal=False)
    tree = explore(inp.system, args.depth, node_budget=args.node_budget,
                   count_all=args.count_all_vars)
    _write(args.out, tree_to_dot(inp.system, tree, width=args.width))
    return EXIT_OK


def cmd_export_smt(args) -> int:
    """One LA and one BSR obligation per tree node, plus a manifest of internal verdicts."""
    inp = _inputs(args)
    tree = explore(inp.system, args.depth, node_budget=args.node_budget,
                   count_all=args.count_all_vars)
    os.makedirs(args.out, exist_ok=True)
    manifest = []
    for node in tree.nodes:
        la = node.vas & inp.goal.vas
        pm = node.pm & inp.goal.pm
        entry = {"node": node.id, "depth": node.depth}
        for part, job in (("vas", emit_la(la, "sat" if la_sat(la)[0] else "unsat")),
                          ("pm", emit_bsr(pm, inp.system.policy,
                                          "sat" if bsr_sat(pm, inp.system.policy).sat
                                          else "unsat"))):
            name = f"node{node.id:05d}_{part}.smt2"
            _write(os.path.join(args.out, name), job.script)
            entry[part] = {"file": name, "expected": job.expected}
        manifest.append(entry)
    _write(os.path.join(args.out, "manifest.json"), json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {2 * len(manifest)} obligations to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_policy_check(args) -> int:
    try:
        policy = load_policy(_read(args.policy))
        senior = sorted(policy.senior)
    except (PolicyError, FormulaSyntax) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    doc = {
        "users": list(policy.users),
        "roles": list(policy.roles),
        "permissions": list(policy.permissions),
        "actions": list(policy.actions),
        "role_order_closure": [list(p) for p in senior if p[0] != p[1]],
        "effective_permissions": {u: [p for p in policy.permissions if policy.can_get(u, p)]
                                  for u in policy.users},
        "unguarded_actions": [a for a in policy.actions if a not in policy.perm_of_action],
        "constraints": [c.to_dict() for c in policy.constraints],
    }
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------

def _add_system_args(p, goal: bool):
    p.add_argument("workflow", help="BPEL process or net JSON")
    p.add_argument("policy", help="policy JSON")
    p.add_argument("--lenient", action="store_true",
                   help="skip unsupported BPEL elements and unbound constrained actions")
    p.add_argument("--depth", type=int, default=None,
                   help="explore at most this many levels (default: until the fix-point)")
    p.add_argument("--node-budget", type=int, default=200_000)
    p.add_argument("--count-all-vars", action="store_true",
                   help="count role variables too in the policy-level bound")
    if goal:
        p.add_argument("--soundness", action="store_true",
                       help="goal: a token on the sink and nowhere else")
        p.add_argument("--goal", help="goal JSON file or inline JSON with keys 'vas' and 'pm'")
        p.add_argument("--goal-vas", help="VAS part of the goal, e.g. 'x3 >= 1'")
        p.add_argument("--goal-pm", help="policy part of the goal (BSR formula)")


def _add_solver_args(p):
    p.add_argument("--solver-path", help="SMT solver binary (default: $BPELCHECK_SOLVER or z3)")
    p.add_argument("--solver-timeout-ms", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpelcheck", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="BPEL process to workflow net JSON")
    p.add_argument("bpel")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.add_argument("--lenient", action="store_true", help="skip unsupported elements")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("verify", help="decide goal reachability")
    _add_system_args(p, goal=True)
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--dot", help="also write the explored tree as DOT")
    p.add_argument("--grounding-budget", type=int, default=2_000_000)
    p.add_argument("--subsume", action="store_true",
                   help="drop nodes whose labels are entailed by an earlier node")
    p.add_argument("--no-timing", action="store_true", help="omit wall time from the report")
    p.add_argument("--cross-check", action="store_true",
                   help="re-decide node obligations with an external SMT solver")
    p.add_argument("--cross-check-limit", type=int, default=200,
                   help="cross-check at most this many nodes")
    _add_solver_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump-tree", help="write the symbolic execution tree as DOT")
    _add_system_args(p, goal=False)
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.add_argument("--width", type=int, default=80, help="clip labels to this many characters")
    p.set_defaults(func=cmd_dump_tree)

    p = sub.add_parser("export-smt", help="write per-node goal obligations as SMT-LIB2 files")
    _add_system_args(p, goal=True)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export_smt)

    p = sub.add_parser("policy-check", help="load a policy and report its closure")
    p.add_argument("policy")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_policy_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NodeBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NODE_BUDGET
    except GroundingBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GROUNDING
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (FormulaSyntax, PolicyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BpelCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
