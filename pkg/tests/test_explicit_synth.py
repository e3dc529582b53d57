import random

from hypothesis import given
from hypothesis import strategies as st

from bpelcheck.engine import build_system
from bpelcheck.explicit import (allowed_users, feasible_sequences, guard_holds, product_reach,
                                reachable_states)
from bpelcheck.rbac.compile import compile_action
from bpelcheck.rbac.ground import holds
from bpelcheck.rbac.logic import BsrFormula
from bpelcheck.synth import dcs_instance, random_bsr, random_policy, random_wf_net
from bpelcheck.wfnet import validate_wf_net


def test_role_constraint(policy):
    done = frozenset({("u3", "crtPay")})
    assert allowed_users(policy, "apprPay", done) == ["u1", "u2"]
    # nobody has executed crtPay yet, so no senior role can be found
    assert allowed_users(policy, "apprPay", frozenset()) == []


def test_po_product(net, policy):
    m0 = net.marking({"p1": 1})
    final = net.marking({"p10": 1})
    res = product_reach(net, m0, policy, lambda m, x: m == final)
    assert res.reachable and len(res.path) == 8
    assert len(feasible_sequences(net, m0, policy, 8)) == 3
    assert any(m == final for m, _ in reachable_states(net, m0, policy, 8))


def test_negative_product(net, policy):
    small = policy.without_users(["u1", "u2"])
    m0, final = net.marking({"p1": 1}), net.marking({"p10": 1})
    assert not product_reach(net, m0, small, lambda m, x: m == final).reachable


@given(st.integers(0, 2**32 - 1))
def test_compiled_guard_matches_policy_definition(seed):
    # two independent routes to the same question: may u perform a after xcd?
    rng = random.Random(seed)
    pol = random_policy(rng, ["a", "b", "c"], max_users=3)
    action = rng.choice(pol.actions)
    t = compile_action(pol, action)
    rest = BsrFormula(t.exists[1:], (), t.guard)
    pairs = [(u, a) for u in pol.users for a in pol.actions]
    for _ in range(8):
        state = frozenset(p for p in pairs if rng.random() < 0.3)
        for u in pol.users:
            assert holds(rest, pol, state, {t.actor: u}) == guard_holds(pol, action, u, state)


@given(st.integers(0, 2**32 - 1))
def test_random_generators(seed):
    rng = random.Random(seed)
    net = random_wf_net(rng)
    validate_wf_net(net, require_acyclic=True)
    pol = random_policy(rng, [t.label for t in net.transitions])
    build_system(net, pol)
    k = random_bsr(rng, pol)
    assert not k.free_vars()


def test_dcs_shape():
    net, pol = dcs_instance()
    system = build_system(net, pol)
    assert len(net.places) == 50 and len(net.transitions) == 26
    assert len(system.unguarded()) == 2
    assert system.info.max_transition_path_length == 26
    assert dcs_instance() == dcs_instance()
