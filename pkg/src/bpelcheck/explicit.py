"""Explicit-state reference semantics: markings paired with ground ``xcd`` relations.

Nothing here goes through formulas for the policy level.  Guards are
evaluated straight from the policy definition, which makes this module
the oracle the symbolic engine is tested against.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import StateBudgetExceeded
from .rbac.policy import USER_DOMAIN, RbacPolicy
from .wfnet import Marking, PetriNet, _fire, enabled_transitions

DEFAULT_PRODUCT_BUDGET = 2_000_000


def guard_holds(policy: RbacPolicy, action: str, user: str, xcd: frozenset) -> bool:
    """May ``user`` perform ``action`` after the executions recorded in ``xcd``?

    The user needs the action's permission (if it has one).  For every
    constraint ``<D, (t1, action), rho>`` some earlier performer of ``t1``
    must stand in ``rho`` with ``user`` (user constraints) or, for role
    constraints, with one of the roles ``user`` is explicitly assigned.
    """
    perm = policy.perm_of_action.get(action)
    if perm is not None and not policy.can_get(user, perm):
        return False
    for c in policy.constraints:
        if c.t2 != action:
            continue
        prior = [x for (x, a) in xcd if a == c.t1]
        if c.domain_kind == USER_DOMAIN:
            ok = any(c.relates(x, user, policy) for x in prior)
        else:
            mine = policy.roles_of.get(user, ())
            ok = any(c.relates(r1, r2, policy)
                     for x in prior for r1 in policy.roles_of.get(x, ()) for r2 in mine)
        if not ok:
            return False
    return True


def allowed_users(policy: RbacPolicy, action: str, xcd: frozenset) -> list:
    return [u for u in policy.users if guard_holds(policy, action, u, xcd)]


State = tuple   # (marking, frozenset of (user, action))


def successors(net: PetriNet, policy: RbacPolicy, state: State):
    """``(transition index, user, next state)`` in transition then user order."""
    m, xcd = state
    for i in enabled_transitions(net, m):
        label = net.transitions[i].label
        m2 = _fire(net, m, i)
        for u in allowed_users(policy, label, xcd):
            yield i, u, (m2, xcd | {(u, label)})


@dataclass
class ExplicitResult:
    reachable: bool
    path: Optional[list] = None        # [(transition id, user), ...]
    state: Optional[State] = None
    explored: int = 0


def product_reach(net: PetriNet, m0: Marking, policy: RbacPolicy,
                  goal: Callable[[Marking, frozenset], bool], *,
                  init_xcd: frozenset = frozenset(), max_depth: Optional[int] = None,
                  budget: int = DEFAULT_PRODUCT_BUDGET) -> ExplicitResult:
    """Breadth-first search of the product state space for a goal state."""
    start = (tuple(m0), frozenset(init_xcd))
    parent = {start: None}
    queue = deque([(start, 0)])
    while queue:
        s, d = queue.popleft()
        if goal(*s):
            path = []
            cur = s
            while parent[cur] is not None:
                prev, tid, u = parent[cur]
                path.append((tid, u))
                cur = prev
            return ExplicitResult(True, path[::-1], s, len(parent))
        if max_depth is not None and d >= max_depth:
            continue
        for i, u, s2 in successors(net, policy, s):
            if s2 not in parent:
                parent[s2] = (s, net.transitions[i].id, u)
                if len(parent) > budget:
                    raise StateBudgetExceeded(f"more than {budget} product states")
                queue.append((s2, d + 1))
    return ExplicitResult(False, None, None, len(parent))


def feasible_sequences(net: PetriNet, m0: Marking, policy: RbacPolicy, depth: int,
                       init_xcd: frozenset = frozenset()) -> set:
    """Transition-id sequences of length ``depth`` that some choice of users can execute."""
    layer = {(): {(tuple(m0), frozenset(init_xcd))}}
    for _ in range(depth):
        nxt: dict = {}
        for seq, states in layer.items():
            for s in states:
                for i, _u, s2 in successors(net, policy, s):
                    nxt.setdefault(seq + (net.transitions[i].id,), set()).add(s2)
        layer = nxt
    return set(layer)


def reachable_states(net: PetriNet, m0: Marking, policy: RbacPolicy, depth: int,
                     init_xcd: frozenset = frozenset()) -> set:
    """Product states reachable in at most ``depth`` steps."""
    seen = {(tuple(m0), frozenset(init_xcd))}
    frontier = list(seen)
    for _ in range(depth):
        nxt = []
        for s in frontier:
            for _i, _u, s2 in successors(net, policy, s):
                if s2 not in seen:
                    seen.add(s2)
                    nxt.append(s2)
        frontier = nxt
    return seen
