"""Deciding BSR formulas over the finite policy structure.

Universal variables are expanded over their (finite) sorts with
miniscoping, so a universal block that only touches part of the matrix is
instantiated only there.  What remains mentions existential variables and
ground ``xcd`` atoms; existential variables are one-hot encoded and the
result is Tseitin-encoded for the CDCL solver in ``sat``.

``evaluate`` and ``naive_sat`` implement the same semantics by brute-force
enumeration and serve as the reference for tests.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..errors import FormulaSyntax, GroundingBudgetExceeded, UndeclaredConstant
from .logic import (FALSE, SORTS, TRUE, And, BoolConst, BsrFormula, Const, Eq, Formula,
                    Not, Or, Pred, Var, conj, disj, neg)
from .policy import RbacPolicy
from .sat import Solver

log = logging.getLogger(__name__)

DEFAULT_GROUNDING_BUDGET = 2_000_000


@dataclass
class BsrResult:
    sat: bool
    assignment: dict = field(default_factory=dict)   # exist var name -> constant name
    xcd: frozenset = frozenset()                      # ground (user, action) pairs

    def __bool__(self):
        return self.sat


# -- normal forms and grounding --------------------------------------------------

def nnf(f: Formula, positive: bool = True, memo: Optional[dict] = None) -> Formula:
    """Negation normal form; formulas already in NNF come back as the same object."""
    if memo is not None:
        key = (id(f), positive)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
    if isinstance(f, Not):
        out = nnf(f.arg, not positive, memo)
    elif isinstance(f, (And, Or)):
        parts = [nnf(a, positive, memo) for a in f.args]
        if positive and all(x is y for x, y in zip(parts, f.args)):
            out = f
        elif isinstance(f, And) == positive:
            out = conj(*parts)
        else:
            out = disj(*parts)
    else:
        out = f if positive else neg(f)
    if memo is not None:
        memo[key] = (f, out)      # keep f alive so its id stays unique
    return out


def _vars_of(f: Formula, memo: dict) -> frozenset:
    key = id(f)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(f, Eq):
        out = frozenset(t for t in (f.left, f.right) if isinstance(t, Var))
    elif isinstance(f, Pred):
        out = frozenset(t for t in f.args if isinstance(t, Var))
    elif isinstance(f, Not):
        out = _vars_of(f.arg, memo)
    elif isinstance(f, (And, Or)):
        out = frozenset().union(*(_vars_of(a, memo) for a in f.args))
    else:
        out = frozenset()
    memo[key] = (f, out)     # keep f alive so its id stays unique
    return out


class _Encoder:
    """Grounds and Tseitin-encodes in one pass.

    Universal (and, for entailment, outer) variables are bound in an
    environment instead of being substituted, so no instance of the matrix
    is ever built; results are memoised per subformula and per binding of
    the variables it mentions.
    """

    def __init__(self, policy: RbacPolicy, exists: tuple, solver: Solver,
                 budget: int = DEFAULT_GROUNDING_BUDGET, xcd: Optional[frozenset] = None):
        self.policy = policy
        self.fixed_xcd = xcd        # when given, xcd is this ground relation, not free
        self.solver = solver
        self.budget = budget
        self.work = 0
        self.onehot: dict = {}
        self.xcd_lits: dict = {}
        self.gates: dict = {}
        self.vmemo: dict = {}
        self.fvt: dict = {}        # id -> free variables as a tuple (objects kept alive by vmemo)
        self.cache: dict = {}
        self.static = {n: policy.relation(n) for n in ("ua", "pa", "geq")}
        for v in exists:
            self.var_lits(v)

    def var_lits(self, v: Var) -> dict:
        """One-hot literals of an existential variable, created on first use."""
        table = self.onehot.get(v)
        if table is None:
            solver = self.solver
            lits = [solver.new_var() for _ in self.policy.constants(v.sort)]
            if not lits:
                solver.add_clause([])
            solver.add_clause(lits)
            for a, b in itertools.combinations(lits, 2):
                solver.add_clause([-a, -b])
            table = self.onehot[v] = dict(zip(self.policy.constants(v.sort), lits))
        return table

    def tick(self):
        self.work += 1
        if self.work > self.budget:
            raise GroundingBudgetExceeded(f"grounding exceeded {self.budget} steps")

    def fv(self, f):
        return _vars_of(f, self.vmemo)

    def envkey(self, f, env):
        if not env:
            return ()
        key = id(f)
        fvt = self.fvt.get(key)
        if fvt is None:
            fvt = self.fvt[key] = tuple(self.fv(f))
        return tuple(map(env.get, fvt))

    # values: True / False / int literal
    def sel(self, t, c, env):
        if isinstance(t, Const):
            return t.name == c
        bound = env.get(t)
        if bound is not None:
            return bound == c
        return self.var_lits(t).get(c, False)

    def candidates(self, t, env):
        if isinstance(t, Const):
            if t.name not in self.policy.constants(t.sort):
                raise UndeclaredConstant(t.name, t.sort)
            return [t.name]
        bound = env.get(t)
        if bound is not None:
            return [bound]
        return list(self.policy.constants(t.sort))

    def xcd(self, u, a):
        key = (u, a)
        if self.fixed_xcd is not None:
            return key in self.fixed_xcd
        lit = self.xcd_lits.get(key)
        if lit is None:
            lit = self.xcd_lits[key] = self.solver.new_var()
        return lit

    def gate_and(self, xs):
        out = []
        for x in xs:
            if x is False:
                return False
            if x is True:
                continue
            out.append(x)
        out = sorted(set(out))
        if not out:
            return True
        present = set(out)
        if any(-x in present for x in out):
            return False
        if len(out) == 1:
            return out[0]
        key = ("and",) + tuple(out)
        g = self.gates.get(key)
        if g is None:
            g = self.solver.new_var()
            for x in out:
                self.solver.add_clause([-g, x])
            self.solver.add_clause([g] + [-x for x in out])
            self.gates[key] = g
        return g

    def gate_or(self, xs):
        r = self.gate_and([(not x) if isinstance(x, bool) else -x for x in xs])
        return (not r) if isinstance(r, bool) else -r

    def lit(self, f: Formula, env: Optional[dict] = None):
        """Encode a formula whose variables are bound in ``env`` or existential."""
        env = env or {}
        key = (id(f), self.envkey(f, env))
        hit = self.cache.get(key)
        if hit is None:
            hit = self.cache[key] = self._lit(f, env)
        return hit

    def _lit(self, f, env):
        if isinstance(f, BoolConst):
            return f.value
        if isinstance(f, Not):
            r = self.lit(f.arg, env)
            return (not r) if isinstance(r, bool) else -r
        if isinstance(f, And):
            return self.gate_and([self.lit(a, env) for a in f.args])
        if isinstance(f, Or):
            return self.gate_or([self.lit(a, env) for a in f.args])
        if isinstance(f, Eq):
            a, b = f.left, f.right
            if a.sort != b.sort:
                return False
            cb = set(self.candidates(b, env))
            return self.gate_or([self.gate_and([self.sel(a, c, env), self.sel(b, c, env)])
                                 for c in self.candidates(a, env) if c in cb])
        if isinstance(f, Pred):
            a, b = f.args
            if f.name == "xcd":
                return self.gate_or([self.gate_and([self.sel(a, cu, env), self.sel(b, ca, env),
                                                    self.xcd(cu, ca)])
                                     for cu in self.candidates(a, env)
                                     for ca in self.candidates(b, env)])
            rel = self.static[f.name]
            return self.gate_or([self.gate_and([self.sel(a, x, env), self.sel(b, y, env)])
                                 for x in self.candidates(a, env)
                                 for y in self.candidates(b, env) if (x, y) in rel])
        raise TypeError(f"not a formula: {f!r}")

    def quant(self, f: Formula, env: dict, blocks: list):
        """Encode ``Q1 vs1 . Q2 vs2 ... f`` (``f`` in NNF) under ``env``.

        ``blocks`` is a list of ``(variables, universal)`` from the outside
        in.  Only the innermost block is miniscoped; outer blocks are
        expanded variable by variable, which is always sound.
        """
        fv = self.fv(f)
        blocks = [(vs & fv, u) for vs, u in blocks]
        blocks = [(vs, u) for vs, u in blocks if vs]
        if not blocks:
            return self.lit(f, env)
        key = (id(f), self.envkey(f, env), tuple(blocks))
        hit = self.cache.get(key)
        if hit is None:
            self.tick()
            hit = self.cache[key] = self._quant(f, env, blocks)
        return hit

    def _quant(self, f, env, blocks):
        qvars, universal = blocks[-1]
        if len(blocks) == 1:
            same = And if universal else Or
            dual = Or if universal else And
            join = self.gate_and if universal else self.gate_or
            merge = self.gate_or if universal else self.gate_and
            if isinstance(f, same):
                return join([self.quant(a, env, blocks) for a in f.args])
            if isinstance(f, dual):
                groups = self._components(f.args, qvars)
                if len(groups) > 1 or len(groups[0][0]) < len(f.args):
                    parts = []
                    grouped = set()
                    for members, vs in groups:
                        grouped.update(map(id, members))
                        g = members[0] if len(members) == 1 else dual(tuple(members))
                        self.fv(g)      # keep g alive while its id is cached
                        parts.append(self.quant(g, env, [(vs, universal)]))
                    parts.extend(self.lit(a, env) for a in f.args if id(a) not in grouped)
                    return merge(parts)
        vs, universal = blocks[0]
        join = self.gate_and if universal else self.gate_or
        v = min(vs, key=lambda x: x.name)
        rest = [(vs - {v}, universal)] + blocks[1:]
        out = []
        for c in self.policy.constants(v.sort):
            self.tick()
            env2 = dict(env)
            env2[v] = c
            r = self.quant(f, env2, rest)
            out.append(r)
            if r is (not universal):
                break
        return join(out)

    def _components(self, args, qvars):
        """Partition the arguments mentioning ``qvars`` into groups sharing a variable."""
        groups: list = []
        for a in args:
            vs = self.fv(a) & qvars
            if not vs:
                continue
            hit = [g for g in groups if g[1] & vs]
            members, allv = [a], set(vs)
            for g in hit:
                members = g[0] + members
                allv |= g[1]
                groups.remove(g)
            groups.append((members, frozenset(allv)))
        order = {id(a): i for i, a in enumerate(args)}
        for g in groups:
            g[0].sort(key=lambda a: order[id(a)])
        return groups or [([], frozenset())]


def _check(k: BsrFormula, policy: RbacPolicy):
    free = k.free_vars()
    if free:
        raise FormulaSyntax(f"free variables {sorted(v.name for v in free)}")
    for v in k.variables:
        if v.sort not in SORTS:
            raise FormulaSyntax(f"unknown sort {v.sort}")


def _assert_root(solver, root):
    if root is False:
        solver.add_clause([])
    elif root is not True:
        solver.add_clause([root])


def _encode(k: BsrFormula, policy: RbacPolicy, budget: int):
    _check(k, policy)
    solver = Solver()
    enc = _Encoder(policy, k.exists, solver, budget)
    _assert_root(solver, enc.quant(nnf(k.matrix), {}, [(frozenset(k.forall), True)]))
    return solver, enc


class BsrContext:
    """One solver shared by many related satisfiability queries.

    Every clause the encoder adds is definitional (gates, one-hot blocks,
    free ``xcd`` atoms), so queries only differ in the root literal passed
    as an assumption.  Subformulas shared between queries, such as a parent
    label inside its children's labels, are encoded once.
    """

    def __init__(self, policy: RbacPolicy, budget: int = DEFAULT_GROUNDING_BUDGET):
        self.policy = policy
        self.budget = budget
        self.solver = Solver()
        self.enc = _Encoder(policy, (), self.solver, budget)
        self.nnf_memo: dict = {}
        self.queries = 0

    def root(self, k: BsrFormula):
        """Literal (or constant) equivalent to ``k`` in this context."""
        _check(k, self.policy)
        if any(not self.policy.constants(v.sort) for v in k.exists):
            return False
        self.enc.work = 0
        return self.enc.quant(nnf(k.matrix, True, self.nnf_memo), {},
                              [(frozenset(k.forall), True)])

    def lit(self, f: Formula):
        """Literal of a quantifier-free formula over existential variables."""
        return self.enc.lit(nnf(f, True, self.nnf_memo))

    def solve(self, lits) -> bool:
        assumptions = []
        for x in lits:
            if x is False:
                return False
            if x is not True:
                assumptions.append(x)
        self.queries += 1
        return bool(self.solver.solve(assumptions))

    def sat(self, k: BsrFormula) -> bool:
        return self.solve([self.root(k)])

    def model(self, exists) -> tuple:
        """``(assignment, xcd)`` of the last satisfiable query."""
        value = self.solver.value
        assignment = {}
        for v in exists:
            table = self.enc.onehot.get(v)
            # a variable the query never mentioned may take any value
            pick = next((c for c, lit in table.items() if value(lit)), None) if table else None
            assignment[v.name] = pick or self.policy.constants(v.sort)[0]
        pairs = frozenset(p for p, lit in self.enc.xcd_lits.items() if value(lit))
        return assignment, pairs


def extend_model(f: Formula, exists: tuple, policy: RbacPolicy, xcd: frozenset,
                 env: Optional[dict] = None) -> Optional[dict]:
    """Values for ``exists`` making the quantifier-free ``f`` true on the ground ``xcd``.

    Variables of ``f`` outside ``exists`` must be bound by ``env``
    (``Var`` to constant name).  Returns ``None`` when there are none.
    """
    solver = Solver()
    enc = _Encoder(policy, exists, solver, xcd=frozenset(xcd))
    root = enc.lit(nnf(f), dict(env or {}))
    if root is False:
        return None
    if root is not True:
        solver.add_clause([root])
    if not solver.solve():
        return None
    return {v.name: next(c for c, lit in enc.onehot[v].items() if solver.value(lit))
            for v in exists}


def bsr_sat(k: BsrFormula, policy: RbacPolicy, *, want_witness: bool = False,
            lexmin: bool = True, budget: int = DEFAULT_GROUNDING_BUDGET,
            hint: Optional[dict] = None) -> BsrResult:
    """Decide ``k`` over the policy structure.

    With ``want_witness`` the result carries an assignment of the
    existential variables and a ground ``xcd``; with ``lexmin`` both are
    lexicographically least (variables in prefix order, values in declared
    constant order, then ``xcd`` pairs preferring absence).  ``hint`` maps
    variable names to preferred constants.
    """
    solver, enc = _encode(k, policy, budget)
    if hint:
        for v, table in enc.onehot.items():
            c = hint.get(v.name)
            if c in table:
                solver.set_phase(table[c])
    if not solver.solve():
        return BsrResult(False)
    if not want_witness:
        return BsrResult(True)
    fixed: list = []
    if lexmin:
        for v in k.exists:
            table = enc.onehot[v]
            for c, lit in table.items():
                if solver.value(lit):
                    fixed.append(lit)
                    break
                if solver.solve(fixed + [lit]):
                    fixed.append(lit)
                    break
        for key in sorted(enc.xcd_lits, key=lambda p: (policy.users.index(p[0]),
                                                        policy.actions.index(p[1]))):
            lit = enc.xcd_lits[key]
            if not solver.value(lit):
                fixed.append(-lit)
            elif solver.solve(fixed + [-lit]):
                fixed.append(-lit)
            else:
                fixed.append(lit)
        ok = solver.solve(fixed)
        assert ok, "lexicographic refinement lost the model"
    assignment = {v.name: next(c for c, lit in enc.onehot[v].items() if solver.value(lit))
                  for v in k.exists}
    pairs = frozenset(p for p, lit in enc.xcd_lits.items() if solver.value(lit))
    return BsrResult(True, assignment, pairs)


def bsr_entails(k1: BsrFormula, k2: BsrFormula, policy: RbacPolicy, *,
                budget: int = 200_000) -> bool:
    """``k1 => k2`` over the policy structure; ``False`` when the budget runs out.

    ``k1 & !k2`` is grounded: the negated existential block of ``k2`` becomes
    universal and its universal block existential.
    """
    k2 = k2.rename_apart(k1.names())
    _check(k1, policy)
    _check(k2, policy)
    # the existential block of k2 is expanded; when that alone is over budget, give up early
    if math.prod(len(policy.constants(v.sort)) for v in k2.exists) > budget:
        log.debug("entailment check skipped: %d existential variables on the right", len(k2.exists))
        return False
    solver = Solver()
    enc = _Encoder(policy, k1.exists, solver, budget)
    try:
        left = enc.quant(nnf(k1.matrix), {}, [(frozenset(k1.forall), True)])
        # !(exists e . forall a . M) == forall e . exists a . !M
        right = enc.quant(nnf(k2.matrix, positive=False), {},
                          [(frozenset(k2.exists), True), (frozenset(k2.forall), False)])
    except GroundingBudgetExceeded:
        log.debug("entailment check gave up after %d grounding steps", budget)
        return False
    root = enc.gate_and([left, right])
    if root is True:
        return False
    if root is False:
        return True
    solver.add_clause([root])
    return not solver.solve()


def bsr_equivalent(k1, k2, policy, **kw) -> bool:
    return bsr_entails(k1, k2, policy, **kw) and bsr_entails(k2, k1, policy, **kw)


# -- reference semantics ---------------------------------------------------------

def evaluate(f: Formula, policy: RbacPolicy, xcd: frozenset, env: dict) -> bool:
    """Truth of a quantifier-free formula; ``env`` maps ``Var`` to constant names."""
    def val(t):
        return t.name if isinstance(t, Const) else env[t]

    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Eq):
        return f.left.sort == f.right.sort and val(f.left) == val(f.right)
    if isinstance(f, Pred):
        pair = (val(f.args[0]), val(f.args[1]))
        return pair in (xcd if f.name == "xcd" else policy.relation(f.name))
    if isinstance(f, Not):
        return not evaluate(f.arg, policy, xcd, env)
    if isinstance(f, And):
        return all(evaluate(a, policy, xcd, env) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, policy, xcd, env) for a in f.args)
    raise TypeError(f"not a formula: {f!r}")


def _assignments(vs, policy):
    for vals in itertools.product(*(policy.constants(v.sort) for v in vs)):
        yield dict(zip(vs, vals))


def holds(k: BsrFormula, policy: RbacPolicy, xcd: frozenset, env: Optional[dict] = None) -> bool:
    """Does the ground state ``xcd`` satisfy ``k`` (by brute-force quantifier expansion)?"""
    env = dict(env or {})
    for e in _assignments(k.exists, policy):
        e.update(env)
        if all(evaluate(k.matrix, policy, xcd, {**e, **a}) for a in _assignments(k.forall, policy)):
            return True
    return False


def models(k: BsrFormula, policy: RbacPolicy, pairs: Iterable) -> list:
    """All subsets of ``pairs`` (as ground ``xcd``) satisfying ``k``."""
    pairs = sorted(pairs)
    out = []
    for r in range(len(pairs) + 1):
        for sub in itertools.combinations(pairs, r):
            s = frozenset(sub)
            if holds(k, policy, s):
                out.append(s)
    return out


def naive_sat(k: BsrFormula, policy: RbacPolicy, pairs: Optional[Iterable] = None) -> bool:
    """Brute force over ``xcd`` subsets of ``pairs`` (default: those the formula can mention)."""
    if pairs is None:
        pairs = relevant_pairs(k, policy)
    pairs = sorted(pairs)
    for r in range(len(pairs) + 1):
        for sub in itertools.combinations(pairs, r):
            if holds(k, policy, frozenset(sub)):
                return True
    return False


def relevant_pairs(k: BsrFormula, policy: RbacPolicy) -> set:
    """Ground ``xcd`` pairs an atom of ``k`` could denote."""
    from .logic import atoms
    out = set()
    for a in atoms(k.matrix):
        if isinstance(a, Pred) and a.name == "xcd":
            us = [a.args[0].name] if isinstance(a.args[0], Const) else policy.users
            acts = [a.args[1].name] if isinstance(a.args[1], Const) else policy.actions
            out.update(itertools.product(us, acts))
    return out


__all__ = ["BsrContext", "BsrResult", "extend_model", "bsr_sat", "bsr_entails", "bsr_equivalent",
           "evaluate", "holds", "models", "naive_sat", "relevant_pairs", "nnf", "TRUE", "FALSE"]
