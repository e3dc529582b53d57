import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpelcheck.engine import (Goal, WitnessStep, build_system, check_goal, completeness_bound,
                              explore, initial_goal, replay_witness, report, search, soundness_goal,
                              tree_to_dot)
from bpelcheck.errors import NodeBudgetExceeded, ReplayStepFailed
from bpelcheck.explicit import feasible_sequences, product_reach
from bpelcheck.rbac.ground import holds
from bpelcheck.rbac.policy import RbacPolicy
from bpelcheck.synth import random_la_goal, random_pm_goal, random_policy, random_wf_net
from bpelcheck.vas import LaFormula, la_entails, la_sat
from bpelcheck.wfnet import series_net

PO_LEVELS = [1, 1, 1, 1, 2, 3, 3, 3, 3]


def sequences(system, tree, level):
    return {tuple(system.net.transitions[n.incoming].id for n in tree.path(nid))
            for nid in tree.levels[level]}


def test_build_system(system):
    assert len(system.net.places) == 10 and len(system.net.transitions) == 8
    assert [system.net.transitions[i].id for i in system.unguarded()] == [
        "crtPO", "flow1-split", "flow1-join"]
    assert completeness_bound(system) == 8


def test_series_bound():
    net = series_net([f"t{i}" for i in range(12)])
    pol = RbacPolicy(["u"], [], [], [], [], [])
    assert completeness_bound(build_system(net, pol)) == 12


def test_depth_zero(system):
    tree = explore(system, 0)
    assert tree.counts() == [1] and not tree.complete


def test_po_tree(system):
    tree = explore(system)
    assert tree.counts() == PO_LEVELS
    assert tree.complete and tree.fixpoint_depth == 8
    for d in range(len(PO_LEVELS)):
        assert sequences(system, tree, d) == feasible_sequences(system.net, system.m0, system.policy, d)
    # the leaves all end in the final marking
    for nid in tree.levels[8]:
        ok, model = la_sat(tree.nodes[nid].vas)
        assert ok and system.net.marking_dict(model) == {"p10": 1}
        assert not la_sat(tree.nodes[nid].vas & LaFormula(10, (((9, "!=", 1),),)))[0]


def test_reach_sets_grow(system):
    tree = explore(system)

    def reach(level):
        out = LaFormula.false(system.vas.nvars)
        for d in range(level + 1):
            for nid in tree.levels[min(d, tree.depth())]:
                out = out | tree.nodes[nid].vas
        return out

    assert la_entails(reach(9), reach(8)) and la_entails(reach(8), reach(9))
    assert not la_entails(reach(8), reach(7))


def test_po_soundness(system):
    goal = soundness_goal(system)
    v = check_goal(system, goal)
    assert v.reachable and v.depth == 8 and len(v.witness) == 8
    assert v.final_marking == {"p10": 1}
    assert replay_witness(system, v.witness, goal, strict=True)


def test_negative_control(system_neg):
    v = check_goal(system_neg, soundness_goal(system_neg))
    assert v.status == "unreachable" and v.complete
    assert v.level_counts == [1, 1, 1, 1, 2, 2] and v.fixpoint_depth == 5


def test_initial_goal(system):
    v = check_goal(system, initial_goal(system))
    assert v.reachable and v.depth == 0 and v.witness == []
    assert replay_witness(system, [], initial_goal(system))


def test_swapped_user_fails_replay(system):
    v = check_goal(system, soundness_goal(system))
    steps = list(v.witness)
    i = next(k for k, s in enumerate(steps) if s.transition == "signGRN")
    approver = next(s.user for s in steps if s.transition == "apprPO")
    steps[i] = WitnessStep(steps[i].transition, steps[i].label, approver, {})
    assert not replay_witness(system, steps, soundness_goal(system))
    with pytest.raises(ReplayStepFailed):
        replay_witness(system, steps, soundness_goal(system), strict=True)
    with pytest.raises(ReplayStepFailed):
        replay_witness(system, [("apprPay", "u1")], strict=True)


def test_budgets(system):
    with pytest.raises(NodeBudgetExceeded):
        check_goal(system, soundness_goal(system), node_budget=3)
    v = check_goal(system, soundness_goal(system), max_depth=3)
    assert v.status == "inconclusive" and not v.complete


def test_policy_goal(system):
    # a goal on the policy level alone: the approver of the order also approves the payment
    from bpelcheck.rbac.syntax import parse_bsr
    pm = parse_bsr("exists x . xcd(x, apprPO) & xcd(x, apprPay)", system.policy)
    goal = Goal(LaFormula.true(system.vas.nvars), pm)
    v = check_goal(system, goal)
    assert v.reachable and replay_witness(system, v.witness, goal, strict=True)
    assert v.goal_assignment == {"x": "u1"}


def test_tree_reuse_and_subsumption(system):
    goal = soundness_goal(system)
    v1, tree = search(system, goal, max_depth=None)
    v2 = check_goal(system, goal, tree=explore(system))
    assert v1.status == v2.status == "reachable"
    v3 = check_goal(system, goal, subsume=True)
    assert v3.reachable and replay_witness(system, v3.witness, goal)


def test_report_and_dot(system):
    v = check_goal(system, soundness_goal(system))
    doc = report(v, system, elapsed=0.5)
    assert doc["system"] == {"places": 10, "transitions": 8, "unguarded": 3, "users": 5,
                             "longest_run": 8, "longest_structural_path": 7, "pm_bound": 1000,
                             "completeness_bound": 8}
    assert doc["verdict"]["status"] == "reachable"
    dot = tree_to_dot(system, explore(system, 2), width=30)
    assert dot.startswith("digraph") and dot.count("->") == 2


def random_instance(rng):
    net = random_wf_net(rng)
    pol = random_policy(rng, [t.label for t in net.transitions])
    return build_system(net, pol)


def random_goal(rng, system):
    la = random_la_goal(rng, system.vas.vars)
    if rng.random() < 0.7:
        return Goal(la, random_pm_goal(rng, system.policy))
    return Goal(la)


def oracle(system, goal):
    def hit(m, x):
        return goal.vas.holds(m) and holds(goal.pm, system.policy, x)
    return product_reach(system.net, system.m0, system.policy, hit)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_random_instances_match_product(seed):
    rng = random.Random(seed)
    system = random_instance(rng)
    tree = explore(system)
    for d in range(len(tree.levels)):
        assert sequences(system, tree, d) == feasible_sequences(system.net, system.m0, system.policy, d)
    for _ in range(3):
        goal = random_goal(rng, system)
        v = check_goal(system, goal, tree=tree)
        assert v.reachable == oracle(system, goal).reachable
        if v.reachable:
            assert replay_witness(system, v.witness, goal, strict=True)
