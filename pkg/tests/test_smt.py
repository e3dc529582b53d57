import random

import pytest
from conftest import solver_available
from hypothesis import given, settings
from hypothesis import strategies as st

from bpelcheck.errors import SolverNotFound
from bpelcheck.rbac.ground import bsr_sat
from bpelcheck.rbac.policy import RbacPolicy
from bpelcheck.rbac.syntax import parse_bsr
from bpelcheck.smt import SolverConfig, emit_bsr, emit_la, run_solver
from bpelcheck.synth import random_bsr, random_la_goal, random_policy
from bpelcheck.vas import la_sat

pytestmark = [pytest.mark.solver,
              pytest.mark.skipif(not solver_available(), reason="no SMT solver on PATH")]


def test_distinct_users_need_two():
    single = RbacPolicy(["u"], [], [], ["a"], [], [])
    k = parse_bsr("exists x:user, y:user . !(x = y)")
    assert run_solver(emit_bsr(k, single)) == "unsat"
    two = RbacPolicy(["u", "v"], [], [], ["a"], [], [])
    assert run_solver(emit_bsr(k, two)) == "sat"


def test_timeout_is_unknown(policy):
    k = parse_bsr("exists x . xcd(x, apprPO)", policy)
    assert run_solver(emit_bsr(k, policy), SolverConfig(timeout_ms=1)) == "unknown"


def test_missing_solver():
    with pytest.raises(SolverNotFound):
        run_solver(emit_la(random_la_goal(random.Random(0), ["p"])),
                   SolverConfig(path="/nonexistent/solver"))


def test_po_policy_structure(policy):
    # the solver sees the hierarchy closure and the assignments
    for text, expect in [("exists x . ua(x, Manager) & geq(Manager, FinClerk)", "sat"),
                         ("geq(FinClerk, Manager)", "unsat"),
                         ("exists x . forall y:user . xcd(x, apprPO) & !xcd(y, apprPO)", "unsat")]:
        assert run_solver(emit_bsr(parse_bsr(text, policy), policy)) == expect


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_la_agrees(seed):
    rng = random.Random(seed)
    k = random_la_goal(rng, [f"p{i}" for i in range(rng.randint(1, 5))])
    assert run_solver(emit_la(k)) == ("sat" if la_sat(k)[0] else "unsat")


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_bsr_agrees(seed):
    rng = random.Random(seed)
    pol = random_policy(rng, ["a", "b", "c"])
    k = random_bsr(rng, pol, max_exists=2, max_forall=2, depth=3)
    assert run_solver(emit_bsr(k, pol)) == ("sat" if bsr_sat(k, pol) else "unsat")
