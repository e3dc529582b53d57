"""Many-sorted, function-free first-order formulas for the policy level.

Atoms are equalities and the binary predicates ``xcd`` (the executed
relation, the only state symbol), ``ua``, ``pa`` and ``geq`` (the role
order).  The smart constructors fold constants eagerly so substitution
chains stay small.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

USER, ROLE, PERMISSION, ACTION = "User", "Role", "Permission", "Action"
SORTS = (USER, ROLE, PERMISSION, ACTION)
PRED_SORTS = {
    "xcd": (USER, ACTION),
    "ua": (USER, ROLE),
    "pa": (ROLE, PERMISSION),
    "geq": (ROLE, ROLE),
}
STATIC_PREDS = ("ua", "pa", "geq")


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    sort: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Const:
    name: str
    sort: str

    def __str__(self):
        return self.name


Term = Union[Var, Const]


class Formula:
    __slots__ = ()


def _cached_hash(self):
    # compound formulas get hashed a lot during simplification; deep hashing is expensive
    h = self._hash
    if not h:
        h = hash((type(self).__name__, self.arg if isinstance(self, Not) else self.args)) or 1
        object.__setattr__(self, "_hash", h)
    return h


@dataclass(frozen=True, slots=True)
class BoolConst(Formula):
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True, slots=True)
class Eq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Pred(Formula):
    name: str
    args: tuple


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    __hash__ = _cached_hash


@dataclass(frozen=True, slots=True)
class And(Formula):
    args: tuple
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    __hash__ = _cached_hash


@dataclass(frozen=True, slots=True)
class Or(Formula):
    args: tuple
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    __hash__ = _cached_hash


# -- smart constructors ------------------------------------------------------

def eq(a: Term, b: Term) -> Formula:
    if a == b:
        return TRUE
    if isinstance(a, Const) and isinstance(b, Const):
        return FALSE
    if a.sort != b.sort:
        return FALSE
    if isinstance(b, Var) and (isinstance(a, Const) or b.name < a.name):
        a, b = b, a
    return Eq(a, b)


def pred(name: str, a: Term, b: Term) -> Formula:
    return Pred(name, (a, b))


def xcd(a: Term, b: Term) -> Formula:
    return Pred("xcd", (a, b))


def neg(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def conj(*fs: Formula) -> Formula:
    out, seen = [], set()
    for f in fs:
        parts = f.args if isinstance(f, And) else (f,)
        for p in parts:
            if p == TRUE:
                continue
            if p == FALSE:
                return FALSE
            if p not in seen:
                seen.add(p)
                out.append(p)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*fs: Formula) -> Formula:
    out, seen = [], set()
    for f in fs:
        parts = f.args if isinstance(f, Or) else (f,)
        for p in parts:
            if p == FALSE:
                continue
            if p == TRUE:
                return TRUE
            if p not in seen:
                seen.add(p)
                out.append(p)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


# -- traversals ----------------------------------------------------------------

def rebuild(f: Formula, atom: Callable[[Formula], Formula]) -> Formula:
    """Rebuild ``f`` bottom-up, mapping every atom through ``atom``.

    Unchanged subformulas are returned as the very same objects, which
    lets callers cache work per subformula identity.
    """
    if isinstance(f, (Eq, Pred)):
        g = atom(f)
        return f if g == f else g
    if isinstance(f, Not):
        a = rebuild(f.arg, atom)
        return f if a is f.arg else neg(a)
    if isinstance(f, (And, Or)):
        args = [rebuild(a, atom) for a in f.args]
        if all(x is y for x, y in zip(args, f.args)):
            return f
        return conj(*args) if isinstance(f, And) else disj(*args)
    return f


def substitute(f: Formula, mapping: dict) -> Formula:
    """Replace variables by terms (a ``{Var: Term}`` map)."""
    if not mapping:
        return f

    def atom(a):
        if isinstance(a, Eq):
            return eq(mapping.get(a.left, a.left), mapping.get(a.right, a.right))
        return Pred(a.name, tuple(mapping.get(t, t) for t in a.args))
    return rebuild(f, atom)


def map_xcd(f: Formula, fn: Callable[[Term, Term], Formula]) -> Formula:
    return rebuild(f, lambda a: fn(*a.args) if isinstance(a, Pred) and a.name == "xcd" else a)


def atoms(f: Formula) -> Iterable[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Eq, Pred)):
            yield g
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, (And, Or)):
            stack.extend(g.args)


def terms(f: Formula) -> set:
    out = set()
    for a in atoms(f):
        out.update((a.left, a.right) if isinstance(a, Eq) else a.args)
    return out


def size(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    return 1


# -- BSR formulas --------------------------------------------------------------

@dataclass(frozen=True)
class BsrFormula:
    """``exists exists_vars . forall forall_vars . matrix`` with a quantifier-free matrix."""
    exists: tuple = ()
    forall: tuple = ()
    matrix: Formula = TRUE

    def __post_init__(self):
        object.__setattr__(self, "exists", tuple(self.exists))
        object.__setattr__(self, "forall", tuple(self.forall))

    @property
    def variables(self) -> tuple:
        return self.exists + self.forall

    def names(self) -> set:
        return {v.name for v in self.variables}

    def free_vars(self) -> set:
        bound = set(self.variables)
        return {t for t in terms(self.matrix) if isinstance(t, Var) and t not in bound}

    def rename_apart(self, taken: set, suffix: str = "'") -> "BsrFormula":
        """Rename bound variables whose names clash with ``taken``."""
        mapping = {}
        used = set(taken) | self.names()
        for v in self.variables:
            if v.name in taken:
                new = v.name + suffix
                while new in used:
                    new += suffix
                used.add(new)
                mapping[v] = Var(new, v.sort)
        if not mapping:
            return self
        return BsrFormula(tuple(mapping.get(v, v) for v in self.exists),
                          tuple(mapping.get(v, v) for v in self.forall),
                          substitute(self.matrix, mapping))

    def __and__(self, other: "BsrFormula") -> "BsrFormula":
        other = other.rename_apart(self.names())
        return BsrFormula(self.exists + other.exists, self.forall + other.forall,
                          conj(self.matrix, other.matrix))

    def __or__(self, other: "BsrFormula") -> "BsrFormula":
        other = other.rename_apart(self.names())
        return BsrFormula(self.exists + other.exists, self.forall + other.forall,
                          disj(self.matrix, other.matrix))

    def user_prefix_length(self) -> int:
        return sum(1 for v in self.exists if v.sort == USER)

    def __str__(self):
        from .syntax import format_bsr
        return format_bsr(self)


BSR_TRUE = BsrFormula()
BSR_FALSE = BsrFormula(matrix=FALSE)


def empty_xcd() -> BsrFormula:
    """``forall x:User, y:Action . !xcd(x, y)`` -- no action executed yet."""
    x, y = Var("x", USER), Var("y", ACTION)
    return BsrFormula((), (x, y), neg(xcd(x, y)))
