"""Concrete text syntax for goal and label formulas.

LA formulas are DNF over unary bound atoms::

    p10 >= 1 & p1 = 0 | p3 != 2

BSR formulas are prenex with an optional existential and universal block::

    exists x:user, r:role . forall y:action . xcd(x, apprPO) & !(x = u1) | ua(x, r)

ASCII (``!``, ``&``, ``|``, ``->``, ``!=``) and Unicode (``¬ ∧ ∨ → ≠ ∃ ∀``)
connectives are both accepted.  Quantified variables may omit their sort
when it can be inferred from a predicate position.  Constants take their
sort from context, falling back to a policy lookup.
"""
from __future__ import annotations

import re
from typing import Sequence

from ..errors import FormulaSyntax, UndeclaredConstant
from ..vas import Atom, LaFormula
from .logic import (ACTION, PERMISSION, PRED_SORTS, ROLE, SORTS, USER, And, BoolConst,
                    BsrFormula, Const, Eq, Formula, Not, Or, Pred, Var, conj, disj, eq,
                    implies, neg)

_SORT_NAMES = {s.lower(): s for s in SORTS}
_UNICODE = {"∃": "exists", "∀": "forall", "¬": "!", "∧": "&", "∨": "|", "≠": "!=", "→": "->",
            "⊤": "true", "⊥": "false"}
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<op>->|!=|>=|<=|[!&|(),.:=<>])
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z0-9_']+)*)
""", re.VERBOSE)


def _tokens(text: str) -> list:
    for k, v in _UNICODE.items():
        text = text.replace(k, f" {v} ")
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntax(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group()))
    return out


class _Stream:
    def __init__(self, toks):
        self.toks, self.i = toks, 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j][1] if j < len(self.toks) else None

    def kind(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self):
        if self.i >= len(self.toks):
            raise FormulaSyntax("unexpected end of formula")
        self.i += 1
        return self.toks[self.i - 1][1]

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise FormulaSyntax(f"expected {tok!r}, found {got!r}")

    def ident(self):
        if self.kind() != "ident":
            raise FormulaSyntax(f"expected a name, found {self.peek()!r}")
        return self.next()

    def done(self):
        return self.i >= len(self.toks)


# -- LA ------------------------------------------------------------------------

def parse_la(text: str, names: Sequence[str]) -> LaFormula:
    """Parse a DNF of ``NAME REL INT`` atoms over the variables ``names``.

    ``x<i>`` (1-based) is accepted for variables without a declared name.
    """
    index = {n: i for i, n in enumerate(names)}
    s = _Stream(_tokens(text))
    disjuncts = []
    while True:
        conj_atoms = []
        while True:
            if s.peek() in ("true", "false"):
                if s.next() == "false":
                    conj_atoms = None
            else:
                name = s.ident()
                if name in index:
                    var = index[name]
                elif re.fullmatch(r"x\d+", name) and 1 <= int(name[1:]) <= len(names):
                    var = int(name[1:]) - 1
                else:
                    raise FormulaSyntax(f"unknown variable {name!r}")
                rel = s.next()
                if rel not in ("=", "!=", ">", ">=", "<=", "<"):
                    raise FormulaSyntax(f"expected a comparison after {name!r}, found {rel!r}")
                if s.kind() != "int":
                    raise FormulaSyntax(f"expected an integer constant, found {s.peek()!r}")
                if conj_atoms is not None:
                    conj_atoms.append(Atom(var, rel, int(s.next())))
                else:
                    s.next()
            if s.peek() != "&":
                break
            s.next()
        if conj_atoms is not None:
            disjuncts.append(tuple(conj_atoms))
        if s.done():
            break
        s.expect("|")
    return LaFormula(len(names), tuple(disjuncts), tuple(names))


def format_la(k: LaFormula) -> str:
    return k.text()


# -- BSR -----------------------------------------------------------------------

def parse_bsr(text: str, policy=None) -> BsrFormula:
    """Parse a prenex BSR formula; ``policy`` resolves and validates constants."""
    s = _Stream(_tokens(text))
    blocks = {"exists": [], "forall": []}
    for q in ("exists", "forall"):
        if s.peek() == q:
            s.next()
            while True:
                name = s.ident()
                sort = None
                if s.peek() == ":":
                    s.next()
                    sname = s.ident()
                    sort = _SORT_NAMES.get(sname.lower())
                    if sort is None:
                        raise FormulaSyntax(f"unknown sort {sname!r}")
                blocks[q].append([name, sort])
                if s.peek() != ",":
                    break
                s.next()
            s.expect(".")
    raw = _parse_imp(s)
    if not s.done():
        raise FormulaSyntax(f"trailing input at {s.peek()!r}")
    declared = blocks["exists"] + blocks["forall"]
    names = [n for n, _ in declared]
    if len(set(names)) != len(names):
        raise FormulaSyntax("variable bound twice")
    sorts = _infer(raw, {n: srt for n, srt in declared}, policy)
    for n in names:
        if sorts.get(n) is None:
            raise FormulaSyntax(f"cannot infer the sort of variable {n!r}")
    bound = {n: Var(n, sorts[n]) for n in names}
    matrix = _build(raw, bound, sorts, policy)
    return BsrFormula(tuple(bound[n] for n, _ in blocks["exists"]),
                      tuple(bound[n] for n, _ in blocks["forall"]), matrix)


def _parse_imp(s):
    left = _parse_or(s)
    if s.peek() == "->":
        s.next()
        return ("imp", left, _parse_imp(s))
    return left


def _parse_or(s):
    parts = [_parse_and(s)]
    while s.peek() == "|":
        s.next()
        parts.append(_parse_and(s))
    return parts[0] if len(parts) == 1 else ("or", parts)


def _parse_and(s):
    parts = [_parse_unary(s)]
    while s.peek() == "&":
        s.next()
        parts.append(_parse_unary(s))
    return parts[0] if len(parts) == 1 else ("and", parts)


def _parse_unary(s):
    tok = s.peek()
    if tok == "!":
        s.next()
        return ("not", _parse_unary(s))
    if tok == "(":
        s.next()
        f = _parse_imp(s)
        s.expect(")")
        return f
    if tok in ("true", "false"):
        s.next()
        return ("bool", tok == "true")
    name = s.ident()
    if s.peek() == "(":
        if name not in PRED_SORTS:
            raise FormulaSyntax(f"unknown predicate {name!r}")
        s.next()
        a = s.ident()
        s.expect(",")
        b = s.ident()
        s.expect(")")
        return ("pred", name, a, b)
    op = s.next()
    if op not in ("=", "!="):
        raise FormulaSyntax(f"expected '=' or '!=' after {name!r}, found {op!r}")
    f = ("eq", name, s.ident())
    return f if op == "=" else ("not", f)


def _walk(raw):
    yield raw
    if raw[0] in ("and", "or"):
        for c in raw[1]:
            yield from _walk(c)
    elif raw[0] == "not":
        yield from _walk(raw[1])
    elif raw[0] == "imp":
        yield from _walk(raw[1])
        yield from _walk(raw[2])


def _policy_sort(name, policy):
    if policy is None:
        return None
    hits = [s for s in SORTS if name in policy.constants(s)]
    return hits[0] if len(hits) == 1 else None


def _infer(raw, sorts, policy) -> dict:
    """Sorts for every identifier, from predicate positions and equalities."""
    sorts = dict(sorts)

    def assign(name, sort):
        old = sorts.get(name)
        if old is not None and old != sort:
            raise FormulaSyntax(f"{name!r} used both as {old} and {sort}")
        sorts[name] = sort

    nodes = list(_walk(raw))
    for f in nodes:
        if f[0] == "pred":
            sa, sb = PRED_SORTS[f[1]]
            assign(f[2], sa)
            assign(f[3], sb)
    changed = True
    while changed:
        changed = False
        for f in nodes:
            if f[0] == "eq":
                a, b = f[1], f[2]
                for x, y in ((a, b), (b, a)):
                    if sorts.get(x) is None and sorts.get(y) is not None:
                        sorts[x] = sorts[y]
                        changed = True
    for f in nodes:
        if f[0] == "eq":
            for x in f[1:]:
                if sorts.get(x) is None:
                    ps = _policy_sort(x, policy)
                    if ps is not None:
                        sorts[x] = ps
            if sorts.get(f[1]) is None and sorts.get(f[2]) is not None:
                sorts[f[1]] = sorts[f[2]]
            if sorts.get(f[2]) is None and sorts.get(f[1]) is not None:
                sorts[f[2]] = sorts[f[1]]
    return sorts


def _build(raw, bound, sorts, policy) -> Formula:
    def term(name):
        if name in bound:
            return bound[name]
        sort = sorts.get(name)
        if sort is None:
            raise FormulaSyntax(f"cannot infer the sort of constant {name!r}")
        if policy is not None and name not in policy.constants(sort):
            raise UndeclaredConstant(name, sort)
        return Const(name, sort)

    def go(f):
        tag = f[0]
        if tag == "bool":
            return BoolConst(f[1])
        if tag == "pred":
            return Pred(f[1], (term(f[2]), term(f[3])))
        if tag == "eq":
            a, b = term(f[1]), term(f[2])
            if a.sort != b.sort:
                raise FormulaSyntax(f"equality between {a.sort} {a} and {b.sort} {b}")
            return eq(a, b)
        if tag == "not":
            return neg(go(f[1]))
        if tag == "and":
            return conj(*map(go, f[1]))
        if tag == "or":
            return disj(*map(go, f[1]))
        return implies(go(f[1]), go(f[2]))
    return go(raw)


def format_formula(f: Formula, prec: int = 0) -> str:
    """Render a quantifier-free matrix; ``prec`` is the binding strength of the context."""
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Pred):
        return f"{f.name}({f.args[0]}, {f.args[1]})"
    if isinstance(f, Not):
        if isinstance(f.arg, Eq):
            return f"{f.arg.left} != {f.arg.right}"
        return "!" + format_formula(f.arg, 3)
    if isinstance(f, And):
        body = " & ".join(format_formula(a, 2) for a in f.args)
        return f"({body})" if prec > 2 else body
    if isinstance(f, Or):
        body = " | ".join(format_formula(a, 1) for a in f.args)
        return f"({body})" if prec > 1 else body
    raise TypeError(f"not a formula: {f!r}")


def _binder(vs) -> str:
    return ", ".join(f"{v.name}:{v.sort.lower()}" for v in vs)


def format_bsr(k: BsrFormula) -> str:
    out = []
    if k.exists:
        out.append(f"exists {_binder(k.exists)} . ")
    if k.forall:
        out.append(f"forall {_binder(k.forall)} . ")
    out.append(format_formula(k.matrix))
    return "".join(out)


def parse_goal(doc: dict, names: Sequence[str], policy=None):
    """``(LaFormula, BsrFormula)`` from a goal document with optional ``vas``/``pm`` strings."""
    if not isinstance(doc, dict) or not set(doc) <= {"vas", "pm"}:
        raise FormulaSyntax("a goal document has the keys 'vas' and/or 'pm'")
    la = parse_la(doc.get("vas", "true"), names)
    pm = parse_bsr(doc.get("pm", "true"), policy)
    return la, pm


__all__ = ["parse_la", "format_la", "parse_bsr", "format_bsr", "format_formula", "parse_goal",
           "USER", "ROLE", "PERMISSION", "ACTION"]
