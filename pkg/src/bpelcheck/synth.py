"""Bundled fixtures and generators of random and large synthetic instances."""
from __future__ import annotations

import random
from importlib import resources

from .bpel import FLOW_JOIN, FLOW_SPLIT, bpel_to_net
from .rbac.logic import (ACTION, PERMISSION, ROLE, USER, BsrFormula, Const, Var, conj, disj, eq, neg, pred,
                         xcd)
from .rbac.policy import REL_EQ, REL_NE, REL_PREC, ROLE_DOMAIN, USER_DOMAIN, AuthConstraint, \
    RbacPolicy, load_policy
from .vas import Atom, LaFormula
from .wfnet import PetriNet, Transition


def fixture_text(name: str) -> str:
    return (resources.files(__package__) / "data" / name).read_text()


def po_net() -> PetriNet:
    return bpel_to_net(fixture_text("po.bpel"))


def po_policy(without=()) -> RbacPolicy:
    policy = load_policy(fixture_text("po_policy.json"))
    return policy.without_users(without) if without else policy


# -- random block-structured workflow nets ---------------------------------------

class _NetBuilder:
    def __init__(self):
        self.places: list = []
        self.transitions: list = []
        self.arcs: list = []

    def place(self):
        self.places.append(f"p{len(self.places) + 1}")
        return self.places[-1]

    def transition(self, label, ins, outs):
        tid = f"t{len(self.transitions) + 1}"
        self.transitions.append(Transition(tid, label))
        self.arcs += [(p, tid) for p in ins] + [(tid, p) for p in outs]
        return tid

    def net(self):
        return PetriNet(self.places, self.transitions, self.arcs)


def random_wf_net(rng: random.Random, *, max_places: int = 12, labels=("a", "b", "c", "d"),
                  max_transitions: int = 9) -> PetriNet:
    """A block-structured acyclic workflow net (sequence, AND-flow and XOR-choice blocks).

    Task labels are drawn from ``labels`` and may repeat; flows use the
    reserved split/join labels.
    """
    b = _NetBuilder()
    # minimum places/transitions still owed to pending flow branches and joins
    owed = [0, 0]

    def room(places, trans):
        return (len(b.places) + owed[0] + places <= max_places
                and len(b.transitions) + owed[1] + trans <= max_transitions)

    def block(inp, depth):
        kind = rng.random()
        # a flow of n branches needs n heads, one leaf per branch and a join place
        if depth < 2 and kind < 0.25 and room(5, 4):
            n = 3 if room(7, 5) and rng.random() < 0.33 else 2
            heads = [b.place() for _ in range(n)]
            b.transition(FLOW_SPLIT, [inp], heads)
            owed[0] += n + 1
            owed[1] += n + 1
            tails = []
            for h in heads:
                owed[0] -= 1
                owed[1] -= 1
                tails.append(block(h, depth + 1))
            owed[0] -= 1
            owed[1] -= 1
            out = b.place()
            b.transition(FLOW_JOIN, tails, [out])
            return out
        if depth < 2 and kind < 0.4 and room(1, 2):
            out = b.place()
            for _ in range(2):
                b.transition(rng.choice(labels), [inp], [out])
            return out
        if depth < 2 and kind < 0.6 and room(2, 2):
            cur = inp
            for _ in range(rng.randint(2, 3)):
                if not room(1, 1):
                    break
                cur = block(cur, depth + 1)
            return cur
        out = b.place()
        b.transition(rng.choice(labels), [inp], [out])
        return out

    cur = b.place()
    for _ in range(rng.randint(1, 3)):
        if not room(1, 1):
            break
        cur = block(cur, 0)
    return b.net()


def random_policy(rng: random.Random, actions, *, max_users: int = 3, max_roles: int = 3,
                  max_permissions: int = 3, max_constraints: int = 3) -> RbacPolicy:
    users = [f"u{i + 1}" for i in range(rng.randint(1, max_users))]
    roles = [f"r{i + 1}" for i in range(rng.randint(1, max_roles))]
    perms = [f"p{i + 1}" for i in range(rng.randint(1, max_permissions))]
    actions = list(dict.fromkeys(actions))
    ua = {(u, rng.choice(roles)) for u in users}
    ua |= {(u, r) for u in users for r in roles if rng.random() < 0.2}
    pa = {(r, p) for r in roles for p in perms if rng.random() < 0.4}
    hierarchy = {(roles[i], roles[j]) for i in range(len(roles)) for j in range(i + 1, len(roles))
                 if rng.random() < 0.35}
    tasks = [a for a in actions if a not in (FLOW_SPLIT, FLOW_JOIN)]
    perm_of_action = {a: rng.choice(perms) for a in tasks if rng.random() < 0.8}
    constraints = []
    for _ in range(rng.randint(0, max_constraints)):
        if not tasks:
            break
        t1, t2 = rng.choice(tasks), rng.choice(tasks)
        kind = USER_DOMAIN if rng.random() < 0.6 else ROLE_DOMAIN
        pool = users if kind == USER_DOMAIN else roles
        r = rng.random()
        if kind == ROLE_DOMAIN and r < 0.35:
            rel = REL_PREC
        elif r < 0.6:
            rel = REL_NE
        elif r < 0.8:
            rel = REL_EQ
        else:
            rel = frozenset((x, y) for x in pool for y in pool if rng.random() < 0.5)
        domain = None
        if rng.random() < 0.3:
            domain = frozenset(x for x in pool if rng.random() < 0.7)
        constraints.append(AuthConstraint(kind, t1, t2, rel, domain))
    return RbacPolicy(users, roles, perms, actions, ua, pa, hierarchy, perm_of_action,
                      constraints)


def random_la_goal(rng: random.Random, names, *, max_const: int = 2) -> LaFormula:
    n = len(names)
    disjuncts = []
    for _ in range(rng.randint(1, 2)):
        atoms = []
        for _ in range(rng.randint(1, 3)):
            atoms.append(Atom(rng.randrange(n), rng.choice(("=", "!=", ">=", "<=", ">", "<")),
                              rng.randint(0, max_const)))
        disjuncts.append(tuple(atoms))
    return LaFormula(n, tuple(disjuncts), tuple(names))


def random_bsr(rng: random.Random, policy: RbacPolicy, *, max_exists: int = 2,
               max_forall: int = 1, depth: int = 2, sorts=(USER, ROLE, ACTION)) -> BsrFormula:
    """A random closed BSR formula over the policy's signature."""
    sorts = [s for s in sorts if policy.constants(s)]
    ex = [Var(f"e{i}", rng.choice(sorts)) for i in range(rng.randint(0, max_exists))]
    fa = [Var(f"a{i}", rng.choice(sorts)) for i in range(rng.randint(0, max_forall))]
    vs = ex + fa

    def term(sort):
        pool = [v for v in vs if v.sort == sort]
        if pool and rng.random() < 0.6:
            return rng.choice(pool)
        return Const(rng.choice(policy.constants(sort)), sort)

    def atom():
        r = rng.random()
        if r < 0.45:
            return xcd(term(USER), term(ACTION))
        if r < 0.6 and policy.roles:
            return pred("ua", term(USER), term(ROLE))
        if r < 0.7 and policy.roles:
            return pred("geq", term(ROLE), term(ROLE))
        if r < 0.75 and policy.roles and policy.permissions:
            return pred("pa", term(ROLE), Const(rng.choice(policy.permissions), PERMISSION))
        s = rng.choice(sorts)
        return eq(term(s), term(s))

    def form(d):
        if d == 0 or rng.random() < 0.3:
            a = atom()
            return neg(a) if rng.random() < 0.4 else a
        parts = [form(d - 1) for _ in range(rng.randint(2, 3))]
        f = conj(*parts) if rng.random() < 0.5 else disj(*parts)
        return neg(f) if rng.random() < 0.2 else f

    return BsrFormula(tuple(ex), tuple(fa), form(depth))


def random_pm_goal(rng: random.Random, policy: RbacPolicy) -> BsrFormula:
    tasks = [a for a in policy.actions if a not in (FLOW_SPLIT, FLOW_JOIN)] or list(policy.actions)
    x, y = Var("x", USER), Var("y", USER)
    a, b = Const(rng.choice(tasks), ACTION), Const(rng.choice(tasks), ACTION)
    shape = rng.randrange(6)
    if shape == 0:
        return BsrFormula((x,), (), conj(xcd(x, a), xcd(x, b)))
    if shape == 1:
        return BsrFormula((x, y), (), conj(xcd(x, a), xcd(y, b), neg(eq(x, y))))
    if shape == 2:
        return BsrFormula((), (x,), neg(xcd(x, a)))
    if shape == 3:
        u = Const(rng.choice(policy.users), USER)
        return BsrFormula((), (), xcd(u, a))
    if shape == 4:
        return BsrFormula((x,), (), conj(xcd(x, a), neg(pred("ua", x, Const(policy.roles[0], ROLE)))))
    return random_bsr(rng, policy, depth=1)


# -- large synthetic instance ------------------------------------------------------

def dcs_instance(seed: int = 7, *, branches: int = 5, tasks: int = 24, places: int = 50,
                 users: int = 5, roles: int = 4, windows: int = 3):
    """Synthetic process of the size of a real-world case study.

    ``tasks`` guarded activities: a prefix sequence, one flow with
    ``branches`` parallel sequences and a suffix sequence; the flow's split
    and join are the only unguarded transitions.  Message places (links
    between branches) bring the place count up to ``places`` and restrict
    the interleavings.  One permission per task; separation- and
    binding-of-duty constraints between tasks that are ordered in every run.
    Returns ``(net, policy)``.
    """
    rng = random.Random(seed)
    b = _NetBuilder()
    names = [f"task{i + 1:02d}" for i in range(tasks)]
    pre, post = 2, 2
    body = names[pre:tasks - post]
    per = [body[i::branches] for i in range(branches)]
    order: dict = {}
    cur = b.place()
    for n in names[:pre]:
        nxt = b.place()
        b.transition(n, [cur], [nxt])
        cur = nxt
    heads = [b.place() for _ in range(branches)]
    b.transition(FLOW_SPLIT, [cur], heads)
    seq_places: dict = {}
    tail = []
    for k, branch in enumerate(per):
        p = heads[k]
        for n in branch:
            q = b.place()
            b.transition(n, [p], [q])
            seq_places[n] = (p, q)
            p = q
        tail.append(p)
    join_out = b.place()
    b.transition(FLOW_JOIN, tail, [join_out])
    cur = join_out
    for n in names[tasks - post:]:
        nxt = b.place()
        b.transition(n, [cur], [nxt])
        cur = nxt
    # links chain the round-robin order body[0] -> body[1] -> ... (so the net stays
    # acyclic), except at ``windows`` positions where body[i] -> body[i + 2] leaves
    # body[i] and body[i + 1] concurrent
    for i, n in enumerate(body):
        order[n] = i
    spots = rng.sample(range(0, len(body) - 2, 2), windows)
    links = [(body[i], body[i + 2] if i in spots else body[i + 1]) for i in range(len(body) - 1)]
    links = links[:max(places - len(b.places), 0)]
    tid = {t.label: t.id for t in b.transitions}
    for a, c in links:
        m = b.place()
        b.arcs += [(tid[a], m), (m, tid[c])]
    net = b.net()

    user_names = [f"u{i + 1}" for i in range(users)]
    role_names = [f"role{i + 1}" for i in range(roles)]
    perms = [f"perm{i + 1:02d}" for i in range(tasks)]
    hierarchy = {(role_names[i], role_names[i + 1]) for i in range(roles - 1)}
    ua = {(user_names[i], role_names[min(i, roles - 1)]) for i in range(users)}
    pa = set()
    for i, p in enumerate(perms):
        pa.add((role_names[1 + i % (roles - 1)], p))
    perm_of_action = dict(zip(names, perms))
    # user constraints between tasks ordered in every run: both in the prefix/suffix, or on
    # the same branch
    ordered = [(names[0], names[1]), (names[-2], names[-1])]
    for branch in per:
        ordered += list(zip(branch, branch[1:]))
    rng.shuffle(ordered)
    constraints = [AuthConstraint(USER_DOMAIN, t1, t2, REL_NE) for t1, t2 in ordered[:6]]
    constraints += [AuthConstraint(USER_DOMAIN, t1, t2, REL_EQ) for t1, t2 in ordered[6:8]]
    policy = RbacPolicy(user_names, role_names, perms, list(names) + [FLOW_SPLIT, FLOW_JOIN],
                        ua, pa, hierarchy, perm_of_action, constraints)
    return net, policy
