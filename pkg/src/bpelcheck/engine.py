"""Two-level symbolic reachability: workflow net (VAS) and RBAC4BPEL policy (BSR).

Nodes of the symbolic execution tree carry one label per level.  A child
is created for every transition whose post-image is satisfiable on both
levels; the post-images are computed separately (the levels share no
state variables) and conjoined.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import NodeBudgetExceeded, ReplayStepFailed
from .explicit import guard_holds
from .rbac.compile import GuardedPmTransition, compile_action, pm_bound, post_image_r
from .rbac.ground import (DEFAULT_GROUNDING_BUDGET, BsrContext, bsr_entails, bsr_sat,
                          extend_model, holds)
from .rbac.logic import ACTION, BSR_TRUE, BsrFormula, Const, conj, empty_xcd, neg, xcd
from .rbac.policy import RbacPolicy
from .rbac.syntax import format_bsr
from .vas import (FULL, Atom, LaFormula, VasSystem, la_entails, la_sat, post_image_v, summarize,
                  vas_from_net)
from .wfnet import Marking, PetriNet, WfNetInfo, _fire, validate_wf_net

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class TwoLevelSystem:
    net: PetriNet
    m0: Marking
    info: WfNetInfo
    vas: VasSystem
    policy: RbacPolicy
    binding: tuple           # GuardedPmTransition per net transition index
    init_r: BsrFormula

    @property
    def pm_transitions(self) -> dict:
        return {t.action: t for t in self.binding}

    def unguarded(self) -> list:
        return [i for i, t in enumerate(self.binding) if t.unguarded]


def build_system(net: PetriNet, policy: RbacPolicy, m0: Optional[Marking] = None, *,
                 strict: bool = False, init_r: Optional[BsrFormula] = None) -> TwoLevelSystem:
    """Pair the net with the compiled policy; transitions are bound by label.

    Net labels missing from the policy's actions are added as unguarded
    actions, so ``xcd`` can record them.
    """
    info = validate_wf_net(net, m0, require_acyclic=True)
    if m0 is None:
        m0 = net.marking({info.source: 1})
    policy = policy.with_actions(t.label for t in net.transitions)
    compiled: dict = {}
    binding = []
    for t in net.transitions:
        if t.label not in compiled:
            compiled[t.label] = compile_action(policy, t.label, strict=strict)
        binding.append(compiled[t.label])
    return TwoLevelSystem(net, tuple(m0), info, vas_from_net(net, m0), policy, tuple(binding),
                          empty_xcd() if init_r is None else init_r)


@dataclass
class SymbolicNode:
    id: int
    depth: int
    vas: LaFormula
    pm: BsrFormula
    incoming: Optional[int] = None       # transition index
    parent: Optional[int] = None         # node id
    step: Optional[GuardedPmTransition] = None   # renamed transition of the incoming step
    children: list = field(default_factory=list)
    # one ground model of ``pm`` (assignment by variable name, xcd pairs), when known
    model: Optional[tuple] = field(default=None, repr=False)
    # actions that may occur in xcd; None when unknown
    recorded: Optional[frozenset] = field(default=None, repr=False)


@dataclass
class SymbolicTree:
    nodes: list
    levels: list                   # node ids per depth
    bound: int                     # completeness bound that was computed
    complete: bool                 # no further node can be added
    fixpoint_depth: Optional[int]  # first depth with an empty (or subsumed) frontier
    subsumed: int = 0

    def path(self, node_id: int) -> list:
        out = []
        n = self.nodes[node_id]
        while n.parent is not None:
            out.append(n)
            n = self.nodes[n.parent]
        return out[::-1]

    def depth(self) -> int:
        return len(self.levels) - 1

    def counts(self) -> list:
        return [len(level) for level in self.levels]


def post_image(system: TwoLevelSystem, node: SymbolicNode, i: int, *,
               prune: bool = True, ctx: Optional[BsrContext] = None) -> tuple:
    """``(vas post, pm post, renamed pm transition)`` of ``node`` under transition ``i``."""
    vas = post_image_v(node.vas, system.vas.transitions[i])
    tr = system.binding[i].renamed(node.pm.names(), str(node.depth + 1))
    pm = post_image_r(node.pm, tr, policy=system.policy if prune else None,
                      ctx=ctx if prune else None)
    return vas, pm, tr


def completeness_bound(system: TwoLevelSystem, *, count_all: bool = False) -> int:
    """``min(longest run of the net, |U|^k * |T|)``."""
    return min(system.info.max_transition_path_length,
               pm_bound(system.policy, system.binding, count_all=count_all))


class _Pruner:
    """Decides which of the two post-image cases of a step are satisfiable.

    Exact, but avoids the full decision procedure where it can: a node's
    stored model is extended with values for the step's fresh variables,
    and the "pair already recorded" case is ruled out for actions that
    cannot be in ``xcd`` yet.  Everything else goes to the shared context.
    """

    def __init__(self, system: TwoLevelSystem, ctx: BsrContext):
        self.policy = system.policy
        self.ctx = ctx
        self.full = 0

    def root(self, node: SymbolicNode):
        if node.pm == empty_xcd():
            node.model, node.recorded = ({}, frozenset()), frozenset()
            return
        res = bsr_sat(node.pm, self.policy, want_witness=True, lexmin=False)
        node.model = (res.assignment, res.xcd) if res.sat else None

    def cases(self, node: SymbolicNode, tr: GuardedPmTransition) -> tuple:
        """``((first case sat, second case sat), model of the child or None)``."""
        act = tr.action
        added = xcd(tr.actor, Const(act, ACTION))
        user = tr.actor.name
        keep1 = keep2 = child = None
        if node.model is not None:
            env, pairs = node.model
            ext = extend_model(conj(tr.guard, neg(added)), tr.exists, self.policy, pairs)
            if ext is not None:
                keep2 = True
                child = ({**env, **ext}, pairs | {(ext[user], act)})
        if node.recorded is not None and act not in node.recorded:
            keep1 = False
        elif node.model is not None:
            ext = extend_model(conj(tr.guard, added), tr.exists, self.policy, pairs)
            if ext is not None:
                keep1 = True
                child = child or ({**env, **ext}, pairs)
        if keep1 is None or keep2 is None:
            self.full += 1
            ctx = self.ctx
            exists = node.pm.exists + tr.exists
            pre = ctx.root(BsrFormula(exists, node.pm.forall, conj(node.pm.matrix, tr.guard)))
            pair = ctx.lit(added)
            if keep2 is None:
                keep2 = ctx.solve([pre, (not pair) if isinstance(pair, bool) else -pair])
                if keep2 and child is None:
                    a, p = ctx.model(exists)
                    child = (a, p | {(a[user], act)})
            if keep1 is None:
                keep1 = ctx.solve([pre, pair])
                if keep1 and child is None:
                    child = ctx.model(exists)
        return (keep1, keep2), child


def _may_fire(boxes, t) -> bool:
    """Cheap necessary condition: some disjunct allows a token on every input place."""
    return any(all(b.get(p, FULL).hi is None or b[p].hi >= 1 for p in t.guard) for b in boxes)


def explore(system: TwoLevelSystem, max_depth: Optional[int] = None, *,
            node_budget: int = DEFAULT_NODE_BUDGET, subsume: bool = False,
            visit: Optional[Callable[[SymbolicNode], bool]] = None,
            count_all: bool = False, ctx: Optional[BsrContext] = None) -> SymbolicTree:
    """Breadth-first construction of the symbolic execution tree.

    With ``max_depth=None`` the tree is expanded to the completeness bound
    and then on until a level comes out empty, which certifies the fix-point
    even when the bound is smaller than the longest run.  ``subsume`` drops
    new nodes whose labels are both entailed by an earlier node.  ``visit``
    is called on each new node and stops the search by returning True.
    Policy-level pruning shares one incremental ``ctx``.
    """
    ctx = ctx or BsrContext(system.policy)
    pruner = _Pruner(system, ctx)
    bound = completeness_bound(system, count_all=count_all)
    root = SymbolicNode(0, 0, system.vas.init, system.init_r)
    pruner.root(root)
    tree = SymbolicTree([root], [[0]], bound, False, None)
    if visit is not None and visit(root):
        return tree
    by_marking: dict = {}
    if subsume:
        by_marking.setdefault(la_sat(root.vas)[1], []).append(root)
    depth = 0
    while True:
        if max_depth is not None and depth >= max_depth:
            break
        level = []
        for nid in tree.levels[depth]:
            node = tree.nodes[nid]
            boxes = [b for b in map(summarize, node.vas.disjuncts)
                     if not any(x.empty() for x in b.values())]
            for i in range(len(system.binding)):
                if not _may_fire(boxes, system.vas.transitions[i]):
                    continue
                vas = post_image_v(node.vas, system.vas.transitions[i])
                ok, model = la_sat(vas)
                if not ok:
                    continue
                tr = system.binding[i].renamed(node.pm.names(), str(depth + 1))
                keep, pm_model = pruner.cases(node, tr)
                if not any(keep):
                    continue
                pm = post_image_r(node.pm, tr, cases=keep)
                recorded = None if node.recorded is None else node.recorded | {tr.action}
                child = SymbolicNode(len(tree.nodes), depth + 1, vas, pm, i, nid, tr,
                                     model=pm_model, recorded=recorded)
                if subsume and _subsumed(child, by_marking.get(model, ()), system.policy):
                    tree.subsumed += 1
                    continue
                if len(tree.nodes) >= node_budget:
                    raise NodeBudgetExceeded(node_budget, len(tree.nodes) + 1)
                tree.nodes.append(child)
                node.children.append(child.id)
                level.append(child.id)
                if subsume:
                    by_marking.setdefault(model, []).append(child)
                if visit is not None and visit(child):
                    tree.levels.append(level)
                    return tree
        if not level:
            tree.complete = True
            tree.fixpoint_depth = depth
            break
        tree.levels.append(level)
        depth += 1
        log.debug("depth %d: %d nodes, %d full policy checks", depth, len(level), pruner.full)
    return tree


def _subsumed(child, candidates, policy) -> bool:
    for other in candidates:
        if la_entails(child.vas, other.vas) and bsr_entails(child.pm, other.pm, policy):
            return True
    return False


# -- goals and verdicts --------------------------------------------------------

@dataclass(frozen=True)
class Goal:
    vas: LaFormula
    pm: BsrFormula = BSR_TRUE


def soundness_goal(system: TwoLevelSystem) -> Goal:
    """Token on the sink and nowhere else."""
    n = system.vas.nvars
    sink = system.net.place_index[system.info.sink]
    atoms = tuple(Atom(i, ">=" if i == sink else "=", 1 if i == sink else 0) for i in range(n))
    return Goal(LaFormula(n, (atoms,), system.vas.vars))


def initial_goal(system: TwoLevelSystem) -> Goal:
    return Goal(system.vas.init, system.init_r)


@dataclass
class WitnessStep:
    transition: str
    label: str
    user: str
    assignment: dict           # existential variables of the step -> constants

    def to_dict(self) -> dict:
        return {"transition": self.transition, "label": self.label, "user": self.user,
                "assignment": dict(self.assignment)}


@dataclass
class Verdict:
    status: str                          # reachable / unreachable / inconclusive
    bound: int
    depth: int                           # deepest level explored
    nodes: int
    complete: bool
    fixpoint_depth: Optional[int] = None
    witness: list = field(default_factory=list)
    final_marking: Optional[dict] = None
    final_xcd: Optional[list] = None
    goal_assignment: dict = field(default_factory=dict)
    level_counts: list = field(default_factory=list)

    @property
    def reachable(self) -> bool:
        return self.status == "reachable"

    def to_dict(self) -> dict:
        doc = {
            "status": self.status,
            "bound": self.bound,
            "depth": self.depth,
            "nodes": self.nodes,
            "level_counts": list(self.level_counts),
            "complete": self.complete,
            "fixpoint_depth": self.fixpoint_depth,
        }
        if self.reachable:
            doc["witness"] = [s.to_dict() for s in self.witness]
            doc["final_state"] = {"marking": self.final_marking, "xcd": self.final_xcd}
            doc["goal_assignment"] = dict(self.goal_assignment)
        return doc


def _hits(system: TwoLevelSystem, node: SymbolicNode, goal: Goal, pm_trivial: bool,
          ctx: BsrContext) -> bool:
    if not la_sat(node.vas & goal.vas)[0]:
        return False
    if pm_trivial:
        return True
    return ctx.sat(node.pm & goal.pm)


def search(system: TwoLevelSystem, goal: Goal, *, tree: Optional[SymbolicTree] = None,
           max_depth: Optional[int] = None, node_budget: int = DEFAULT_NODE_BUDGET,
           subsume: bool = False, count_all: bool = False,
           grounding_budget: int = DEFAULT_GROUNDING_BUDGET) -> tuple:
    """``(Verdict, SymbolicTree)``; see ``check_goal``."""
    pm_trivial = goal.pm == BSR_TRUE
    hit: list = []
    ctx = BsrContext(system.policy, grounding_budget)

    def visit(node):
        if _hits(system, node, goal, pm_trivial, ctx):
            hit.append(node)
            return True
        return False

    if tree is None:
        tree = explore(system, max_depth, node_budget=node_budget, subsume=subsume, visit=visit,
                       count_all=count_all, ctx=ctx)
    else:
        for level in tree.levels:
            for nid in level:
                if visit(tree.nodes[nid]):
                    break
            if hit:
                break
    common = dict(bound=tree.bound, depth=tree.depth(), nodes=len(tree.nodes),
                  complete=tree.complete, fixpoint_depth=tree.fixpoint_depth,
                  level_counts=tree.counts())
    if not hit:
        return Verdict("unreachable" if tree.complete else "inconclusive", **common), tree
    node = hit[0]
    common["depth"] = node.depth
    return _witness(system, tree, node, goal, common, grounding_budget), tree


def check_goal(system: TwoLevelSystem, goal: Goal, **kw) -> Verdict:
    """Search the symbolic tree breadth-first for a node compatible with ``goal``.

    Each node is tested level by level: the VAS label with the VAS part of
    the goal, the policy label with the policy part.  Passing a finished
    ``tree`` reuses it instead of exploring again.  Keywords: ``tree``,
    ``max_depth``, ``node_budget``, ``subsume``, ``count_all``,
    ``grounding_budget``.
    """
    return search(system, goal, **kw)[0]


def _witness(system, tree, node, goal, common, budget=DEFAULT_GROUNDING_BUDGET) -> Verdict:
    combined = node.pm & goal.pm
    res = bsr_sat(combined, system.policy, want_witness=True, budget=budget)
    _, marking = la_sat(node.vas & goal.vas)
    steps = []
    for n in tree.path(node.id):
        t = system.net.transitions[n.incoming]
        steps.append(WitnessStep(t.id, t.label, res.assignment[n.step.actor.name],
                                 {v.name: res.assignment[v.name] for v in n.step.exists}))
    # the goal's variables were renamed apart from the label; report them by their own names
    goal_vars = zip((v.name for v in goal.pm.exists),
                    (v.name for v in combined.exists[len(node.pm.exists):]))
    users = system.policy.users
    acts = system.policy.actions
    xcd = sorted(res.xcd, key=lambda p: (users.index(p[0]), acts.index(p[1])))
    return Verdict("reachable", witness=steps,
                   final_marking=system.net.marking_dict(marking),
                   final_xcd=[list(p) for p in xcd],
                   goal_assignment={v: res.assignment[w] for v, w in goal_vars}, **common)


def replay_witness(system: TwoLevelSystem, witness: list, goal: Optional[Goal] = None, *,
                   init_xcd: frozenset = frozenset(), strict: bool = False) -> bool:
    """Re-execute the witness on explicit markings and ``xcd`` relations.

    Guards are checked directly against the policy.  Returns True when every
    step is legal and the final state meets ``goal``; with ``strict`` a
    failing step raises ``ReplayStepFailed`` instead.
    """
    def fail(idx, reason):
        if strict:
            raise ReplayStepFailed(idx, reason)
        log.info("replay failed at step %s: %s", idx, reason)
        return False

    m = tuple(system.m0)
    xcd = frozenset(init_xcd)
    for idx, step in enumerate(witness):
        tid = step.transition if isinstance(step, WitnessStep) else step[0]
        user = step.user if isinstance(step, WitnessStep) else step[1]
        if tid not in system.net.transition_index:
            return fail(idx, f"unknown transition {tid!r}")
        i = system.net.transition_index[tid]
        if not all(m[p] >= 1 for p in system.net.pre[i]):
            return fail(idx, f"{tid} is not enabled")
        label = system.net.transitions[i].label
        if user not in system.policy.users:
            return fail(idx, f"unknown user {user!r}")
        if not guard_holds(system.policy, label, user, xcd):
            return fail(idx, f"{user} may not perform {label}")
        m = _fire(system.net, m, i)
        xcd = xcd | {(user, label)}
    if goal is not None:
        if not goal.vas.holds(m):
            return fail(len(witness), "final marking misses the goal")
        if goal.pm != BSR_TRUE and not holds(goal.pm, system.policy, xcd):
            return fail(len(witness), "final xcd misses the goal")
    return True


# -- output --------------------------------------------------------------------

def _clip(text: str, width: int) -> str:
    return text if width <= 0 or len(text) <= width else text[:max(width - 3, 0)] + "..."


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def tree_to_dot(system: TwoLevelSystem, tree: SymbolicTree, *, width: int = 80) -> str:
    lines = ["digraph symbolic_tree {", "  node [shape=box, fontname=monospace];"]
    for n in tree.nodes:
        vas = _clip(n.vas.text(), width)
        pm = _clip(format_bsr(n.pm), width)
        label = f"n{n.id} (depth {n.depth})\\nV: {_dot_escape(vas)}\\nR: {_dot_escape(pm)}"
        lines.append(f'  n{n.id} [label="{label}"];')
    for n in tree.nodes:
        if n.parent is not None:
            t = system.net.transitions[n.incoming]
            lines.append(f'  n{n.parent} -> n{n.id} [label="{_dot_escape(t.id)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def report(verdict: Verdict, system: TwoLevelSystem, *, elapsed: Optional[float] = None) -> dict:
    doc = {
        "verdict": verdict.to_dict(),
        "system": {
            "places": len(system.net.places),
            "transitions": len(system.net.transitions),
            "unguarded": len(system.unguarded()),
            "users": len(system.policy.users),
            "longest_run": system.info.max_transition_path_length,
            "longest_structural_path": system.info.longest_structural_path,
            "pm_bound": pm_bound(system.policy, system.binding),
            "completeness_bound": verdict.bound,
        },
    }
    if elapsed is not None:
        doc["timing"] = {"wall_seconds": round(elapsed, 6)}
    return doc


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
