"""SMT-LIB2 rendering of node labels and goals, and an external solver driver.

Internal procedures decide every formula on their own; the solver is only
an independent cross-check.
"""
from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from typing import Optional

from .errors import BpelCheckError, SmtParseError, SolverCrashed, SolverNotFound
from .rbac.logic import (SORTS, And, BoolConst, BsrFormula, Eq, Formula, Not, Or, Pred,
                         Var)
from .rbac.policy import RbacPolicy
from .vas import LaFormula

log = logging.getLogger(__name__)

SOLVER_ENV = "BPELCHECK_SOLVER"
DEFAULT_TIMEOUT_MS = 10_000


@dataclass(frozen=True)
class SmtJob:
    logic: str
    script: str
    expected: Optional[str] = None    # sat / unsat when known, else None


@dataclass(frozen=True)
class SolverConfig:
    path: Optional[str] = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    args: tuple = field(default=())

    def resolve(self) -> list:
        exe = self.path or os.environ.get(SOLVER_ENV) or "z3"
        found = shutil.which(exe)
        if found is None:
            raise SolverNotFound(f"SMT solver {exe!r} not found")
        args = list(self.args)
        if not args:
            args = ["-in", "-smt2"] if "z3" in os.path.basename(found) else ["--lang=smt2"]
        return [found, *args]


def _symbol(prefix: str, name: str, idx: int) -> str:
    return f"{prefix}{idx}_{re.sub(r'[^A-Za-z0-9_]', '_', name)}"


# -- linear arithmetic ---------------------------------------------------------

def emit_la(k: LaFormula, expected: Optional[str] = None) -> SmtJob:
    """Integer constants per variable, non-negativity, and the DNF itself."""
    names = k.names or tuple(f"x{i + 1}" for i in range(k.nvars))
    syms = [_symbol("x", n, i) for i, n in enumerate(names)]
    out = ["(set-logic QF_LIA)"]
    out += [f"(declare-const {s} Int)" for s in syms]
    out += [f"(assert (>= {s} 0))" for s in syms]

    def atom(a):
        c = str(a.const) if a.const >= 0 else f"(- {-a.const})"
        if a.rel == "!=":
            return f"(not (= {syms[a.var]} {c}))"
        return f"({a.rel} {syms[a.var]} {c})"

    parts = []
    for d in k.disjuncts:
        if not d:
            parts.append("true")
        elif len(d) == 1:
            parts.append(atom(d[0]))
        else:
            parts.append("(and " + " ".join(map(atom, d)) + ")")
    body = "false" if not parts else parts[0] if len(parts) == 1 else "(or " + " ".join(parts) + ")"
    out.append(f"(assert {body})")
    out.append("(check-sat)")
    return SmtJob("QF_LIA", "\n".join(out) + "\n", expected)


# -- BSR -----------------------------------------------------------------------

class _Names:
    def __init__(self):
        self.table: dict = {}

    def __call__(self, key, prefix, name):
        sym = self.table.get(key)
        if sym is None:
            sym = self.table[key] = _symbol(prefix, name, len(self.table))
        return sym


def emit_bsr(k: BsrFormula, policy: RbacPolicy, expected: Optional[str] = None) -> SmtJob:
    """Finite sorts with enumeration axioms, the policy relations, ``xcd`` free, then ``k``."""
    names = _Names()
    used = {v.sort for v in k.variables}

    def const(sort, c):
        return names(("c", sort, c), "c", c)

    out = ["(set-logic UF)"]
    for s in SORTS:
        if s in used and not policy.constants(s):
            raise BpelCheckError(f"sort {s} has no elements and cannot be declared")
    sorts = [s for s in SORTS if policy.constants(s)]
    for s in sorts:
        out.append(f"(declare-sort {s} 0)")
    for s in sorts:
        cs = policy.constants(s)
        out += [f"(declare-const {const(s, c)} {s})" for c in cs]
        if len(cs) > 1:
            out.append("(assert (distinct " + " ".join(const(s, c) for c in cs) + "))")
        cover = " ".join(f"(= e {const(s, c)})" for c in cs)
        out.append(f"(assert (forall ((e {s})) {cover if len(cs) == 1 else '(or ' + cover + ')'}))")

    def relation(name, s1, s2, pairs):
        out.append(f"(declare-fun {name} ({s1} {s2}) Bool)")
        cases = [f"(and (= a {const(s1, x)}) (= b {const(s2, y)}))" for x, y in sorted(pairs)]
        body = "false" if not cases else cases[0] if len(cases) == 1 else "(or " + " ".join(cases) + ")"
        out.append(f"(assert (forall ((a {s1}) (b {s2})) (= ({name} a b) {body})))")

    if "Role" in sorts:
        relation("ua", "User", "Role", policy.ua)
        if "Permission" in sorts:
            relation("pa", "Role", "Permission", policy.pa)
        relation("geq", "Role", "Role", policy.senior)
        for a, b in sorted(policy.hierarchy):
            out.append(f"(assert (geq {const('Role', a)} {const('Role', b)}))")
        out.append("(assert (forall ((a Role)) (geq a a)))")
        out.append("(assert (forall ((a Role) (b Role) (c Role)) "
                   "(=> (and (geq a b) (geq b c)) (geq a c))))")
        out.append("(assert (forall ((a Role) (b Role)) (=> (and (geq a b) (geq b a)) (= a b))))")
    if "Action" in sorts:
        out.append("(declare-fun xcd (User Action) Bool)")

    def term(t):
        if isinstance(t, Var):
            return names(("v", t), "v", t.name)
        return const(t.sort, t.name)

    def form(f: Formula) -> str:
        if isinstance(f, BoolConst):
            return "true" if f.value else "false"
        if isinstance(f, Eq):
            return f"(= {term(f.left)} {term(f.right)})"
        if isinstance(f, Pred):
            return f"({f.name} {term(f.args[0])} {term(f.args[1])})"
        if isinstance(f, Not):
            return f"(not {form(f.arg)})"
        if isinstance(f, And):
            return "(and " + " ".join(map(form, f.args)) + ")"
        if isinstance(f, Or):
            return "(or " + " ".join(map(form, f.args)) + ")"
        raise TypeError(f"not a formula: {f!r}")

    body = form(k.matrix)
    if k.forall:
        binds = " ".join(f"({term(v)} {v.sort})" for v in k.forall)
        body = f"(forall ({binds}) {body})"
    if k.exists:
        binds = " ".join(f"({term(v)} {v.sort})" for v in k.exists)
        body = f"(exists ({binds}) {body})"
    out.append(f"(assert {body})")
    out.append("(check-sat)")
    return SmtJob("UF", "\n".join(out) + "\n", expected)


# -- driver --------------------------------------------------------------------

def run_solver(job: SmtJob, config: Optional[SolverConfig] = None) -> str:
    """``sat``, ``unsat`` or ``unknown`` (also on timeout)."""
    config = config or SolverConfig()
    cmd = config.resolve()
    try:
        proc = subprocess.run(cmd, input=job.script, capture_output=True, text=True,
                              timeout=max(config.timeout_ms, 1) / 1000.0)
    except subprocess.TimeoutExpired:
        log.info("solver timed out after %d ms", config.timeout_ms)
        return "unknown"
    except OSError as exc:
        raise SolverNotFound(str(exc)) from exc
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    for ln in lines:
        if ln in ("sat", "unsat", "unknown"):
            return ln
        if ln.startswith("(error"):
            raise SolverCrashed(proc.returncode, ln[:500])
        if ln == "timeout":
            return "unknown"
    if proc.returncode != 0:
        raise SolverCrashed(proc.returncode, (proc.stderr or proc.stdout)[:500])
    raise SmtParseError(f"no status in solver output: {proc.stdout[:200]!r}")
