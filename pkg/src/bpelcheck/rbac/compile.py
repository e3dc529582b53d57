"""Authorization constraints as guarded transitions over ``xcd``, and their post-image."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

from ..errors import UnboundAction
from .logic import (ACTION, FALSE, PERMISSION, ROLE, USER, BsrFormula, Const, Formula, Var, conj, disj, eq,
                    implies, map_xcd, neg, pred, substitute, xcd)
from .policy import REL_EQ, REL_NE, REL_PREC, USER_DOMAIN, AuthConstraint, RbacPolicy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GuardedPmTransition:
    """``exists vars . guard`` with the update ``xcd' = xcd + {(actor, action)}``.

    ``actor`` is the first existential variable; ``permission`` is ``None``
    for unguarded actions, whose guard only carries constraint clauses (and
    is usually ``true``).
    """
    action: str
    exists: tuple
    actor: Var
    guard: Formula
    permission: Optional[str] = None

    @property
    def unguarded(self) -> bool:
        return self.permission is None

    def user_prefix_length(self) -> int:
        return sum(1 for v in self.exists if v.sort == USER)

    def renamed(self, taken: set, tag: str = "") -> "GuardedPmTransition":
        """Copy with existential variables renamed away from ``taken``.

        New names are ``<name>_<tag>`` (plus primes on a clash), so the actor
        of step ``tag`` stays recognisable in witnesses.
        """
        mapping = {}
        used = set(taken)
        for v in self.exists:
            new = f"{v.name}_{tag}" if tag != "" else v.name
            while new in used:
                new += "'"
            used.add(new)
            mapping[v] = Var(new, v.sort)
        return GuardedPmTransition(self.action, tuple(mapping[v] for v in self.exists),
                                   mapping[self.actor], substitute(self.guard, mapping),
                                   self.permission)

    def as_formula(self) -> BsrFormula:
        return BsrFormula(self.exists, (), self.guard)


def _member(t, domain, sort):
    if domain is None:
        return conj()
    return disj(*(eq(t, Const(d, sort)) for d in sorted(domain)))


def _related(a, b, c: AuthConstraint, sort) -> Formula:
    if c.relation == REL_NE:
        return neg(eq(a, b))
    if c.relation == REL_EQ:
        return eq(a, b)
    if c.relation == REL_PREC:
        return conj(pred("geq", b, a), neg(eq(a, b)))
    return disj(*(conj(eq(a, Const(x, sort)), eq(b, Const(y, sort))) for x, y in sorted(c.relation)))


def constraint_clause(c: AuthConstraint, actor: Var, idx: int) -> tuple:
    """``(exist vars, formula)`` requiring a prior performer of ``t1`` related to ``actor``."""
    x1 = Var(f"x{idx}", USER)
    done = xcd(x1, Const(c.t1, ACTION))
    if c.domain_kind == USER_DOMAIN:
        body = implies(conj(_member(x1, c.domain, USER), _member(actor, c.domain, USER)),
                       _related(x1, actor, c, USER))
        return (x1,), conj(done, body)
    r1, r2 = Var(f"r{idx}", ROLE), Var(f"s{idx}", ROLE)
    body = implies(conj(_member(r1, c.domain, ROLE), _member(r2, c.domain, ROLE)),
                   _related(r1, r2, c, ROLE))
    return (x1, r1, r2), conj(done, pred("ua", x1, r1), pred("ua", actor, r2), body)


def permission_clause(actor: Var, permission: str) -> tuple:
    """``exists q, r . ua(actor, q) & geq(q, r) & pa(r, permission)``."""
    q, r = Var("q", ROLE), Var("r", ROLE)
    return (q, r), conj(pred("ua", actor, q), pred("geq", q, r),
                        pred("pa", r, Const(permission, PERMISSION)))


def compile_action(policy: RbacPolicy, action: str, *, strict: bool = False) -> GuardedPmTransition:
    actor = Var("u", USER)
    exists, parts = [actor], []
    perm = policy.perm_of_action.get(action)
    mine = [c for c in policy.constraints if c.t2 == action]
    if perm is not None:
        vs, f = permission_clause(actor, perm)
        exists += vs
        parts.append(f)
    elif mine:
        if strict:
            raise UnboundAction(action)
        log.warning("constraint on unguarded action %s", action)
    for i, c in enumerate(mine, 1):
        vs, f = constraint_clause(c, actor, i)
        exists += vs
        parts.append(f)
    return GuardedPmTransition(action, tuple(exists), actor, conj(*parts), perm)


def compile_constraints(policy: RbacPolicy, actions: Optional[Iterable[str]] = None, *,
                        strict: bool = False) -> dict:
    """Map each action label to its guarded transition (all policy actions by default)."""
    labels = policy.actions if actions is None else tuple(dict.fromkeys(actions))
    return {a: compile_action(policy, a, strict=strict) for a in labels}


def pm_bound(policy: RbacPolicy, transitions: Iterable[GuardedPmTransition], *,
             count_all: bool = False) -> int:
    """``|U| ** k * n`` with ``k`` the largest existential prefix over the transitions.

    By default only user-sorted variables count towards ``k``.
    """
    trs = list(transitions)
    if not trs:
        return 0
    k = max(len(t.exists) if count_all else t.user_prefix_length() for t in trs)
    return len(policy.users) ** k * len(trs)


def _negate(lit):
    return (not lit) if isinstance(lit, bool) else -lit


def post_image_r(k: BsrFormula, t: GuardedPmTransition, *, tag: str = "",
                 policy: Optional[RbacPolicy] = None, ctx=None,
                 cases: Optional[tuple] = None) -> BsrFormula:
    """States reachable from ``k`` by one ``t`` step.

    Two cases on whether the recorded pair was already present:

    * ``k & xcd(u, t) & guard``
    * ``(k & guard)[xcd(a, b) := !(a = u & b = t) & xcd(a, b)] & xcd(u, t)``

    With a policy (or a ``BsrContext``), disjuncts that are unsatisfiable
    are dropped; ``cases`` supplies that decision (two booleans) directly.
    The universal variables of the second case are renamed apart only when
    both cases survive.
    """
    from .ground import bsr_sat

    t = t.renamed(k.names(), tag)
    u, act = t.actor, Const(t.action, ACTION)
    added = xcd(u, act)

    def sigma(a, b):
        return conj(neg(conj(eq(a, u), eq(b, act))), xcd(a, b))

    exists = k.exists + t.exists
    d1 = BsrFormula(exists, k.forall, conj(k.matrix, added, t.guard))
    d2 = BsrFormula(exists, k.forall,
                    conj(map_xcd(k.matrix, sigma), map_xcd(t.guard, sigma), added))
    decided = cases is not None or ctx is not None or policy is not None
    if cases is not None:
        cases = [d for d, ok in zip((d1, d2), cases) if ok]
    elif ctx is not None:
        # both cases are decided on the pre-state: the first needs the pair
        # already recorded, the second needs it absent (it is added by the step)
        pre = ctx.root(BsrFormula(exists, k.forall, conj(k.matrix, t.guard)))
        pair = ctx.lit(added)
        keep = [ctx.solve([pre, pair]), ctx.solve([pre, _negate(pair)])]
        cases = [d for d, ok in zip((d1, d2), keep) if ok]
    elif policy is not None:
        cases = [d for d in (d1, d2) if bsr_sat(d, policy).sat]
    else:
        cases = [d1, d2]
    if decided and not cases:
        return BsrFormula(exists, (), FALSE)
    if len(cases) == 1:
        return cases[0]
    d2r = BsrFormula((), d2.forall, d2.matrix).rename_apart(
        {v.name for v in exists} | {v.name for v in k.forall})
    return BsrFormula(exists, k.forall + d2r.forall, disj(d1.matrix, d2r.matrix))
