"""Vector addition systems over unary-bound linear-arithmetic formulas.

A state formula is kept in DNF; each conjunction is a list of atoms
``x_i REL c`` over non-negative integer variables.  That fragment is closed
under the post-image of a VAS transition, and satisfiability reduces to
per-variable interval reasoning.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import NonUnaryAtom
from .wfnet import Marking, PetriNet

RELATIONS = ("=", "!=", ">", ">=", "<=", "<")
_NEGATE = {"=": "!=", "!=": "=", ">": "<=", ">=": "<", "<=": ">", "<": ">="}


class Atom(NamedTuple):
    var: int
    rel: str
    const: int


@dataclass(frozen=True)
class Bounds:
    """Set of non-negative integers ``[lo, hi]`` minus ``holes`` (``hi=None`` is unbounded)."""
    lo: int = 0
    hi: Optional[int] = None
    holes: frozenset = frozenset()

    def restrict(self, rel: str, c: int) -> "Bounds":
        lo, hi, holes = self.lo, self.hi, self.holes
        if rel == "=":
            lo, hi = max(lo, c), c if hi is None else min(hi, c)
        elif rel == ">=":
            lo = max(lo, c)
        elif rel == ">":
            lo = max(lo, c + 1)
        elif rel == "<=":
            hi = c if hi is None else min(hi, c)
        elif rel == "<":
            hi = c - 1 if hi is None else min(hi, c - 1)
        elif rel == "!=":
            holes = holes | {c}
        else:
            raise NonUnaryAtom(f"unknown relation {rel!r}")
        return Bounds(lo, hi, holes).normalized()

    def normalized(self) -> "Bounds":
        lo, hi = self.lo, self.hi
        holes = set(self.holes)
        while lo in holes:
            lo += 1
        while hi is not None and hi in holes and hi >= lo:
            hi -= 1
        holes = frozenset(h for h in holes if h > lo and (hi is None or h < hi))
        return Bounds(lo, hi, holes)

    def empty(self) -> bool:
        return self.hi is not None and self.hi < self.lo

    def full(self) -> bool:
        return self.lo == 0 and self.hi is None and not self.holes

    def __contains__(self, v: int) -> bool:
        return v >= self.lo and (self.hi is None or v <= self.hi) and v not in self.holes

    def least(self) -> int:
        return self.lo

    def atoms(self, var: int) -> list:
        if self.empty():
            return [Atom(var, "<", 0)]
        if self.hi == self.lo:
            return [Atom(var, "=", self.lo)]
        out = []
        if self.lo > 0:
            out.append(Atom(var, ">=", self.lo))
        if self.hi is not None:
            out.append(Atom(var, "<=", self.hi))
        out.extend(Atom(var, "!=", h) for h in sorted(self.holes))
        return out

    def breakpoints(self) -> set:
        pts = {self.lo}
        if self.hi is not None:
            pts.add(self.hi + 1)
        for h in self.holes:
            pts.update((h, h + 1))
        return pts


FULL = Bounds()


def summarize(conj: Iterable[Atom]) -> dict:
    """Per-variable ``Bounds`` of one conjunction (only constrained variables appear)."""
    out: dict = {}
    for a in conj:
        if not isinstance(a, Atom) and not (isinstance(a, tuple) and len(a) == 3):
            raise NonUnaryAtom(f"not a unary bound atom: {a!r}")
        var, rel, c = a
        if rel not in _NEGATE:
            raise NonUnaryAtom(f"unknown relation {rel!r}")
        out[var] = out.get(var, FULL).restrict(rel, c)
    return out


@dataclass(frozen=True)
class LaFormula:
    """Disjunction of conjunctions of unary bound atoms over ``nvars`` variables.

    No disjuncts means false; a disjunct without atoms is true.
    """
    nvars: int
    disjuncts: tuple = ((),)
    names: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "disjuncts",
                           tuple(tuple(Atom(*a) for a in d) for d in self.disjuncts))
        for d in self.disjuncts:
            for a in d:
                if not 0 <= a.var < self.nvars:
                    raise NonUnaryAtom(f"atom {a} references undeclared variable")

    @classmethod
    def true(cls, nvars, names=None):
        return cls(nvars, ((),), names)

    @classmethod
    def false(cls, nvars, names=None):
        return cls(nvars, (), names)

    @classmethod
    def from_marking(cls, m: Marking, names=None):
        return cls(len(m), (tuple(Atom(i, "=", c) for i, c in enumerate(m)),), names)

    def __and__(self, other: "LaFormula") -> "LaFormula":
        _same_space(self, other)
        return LaFormula(self.nvars, tuple(a + b for a in self.disjuncts for b in other.disjuncts),
                         self.names or other.names).normalized()

    def __or__(self, other: "LaFormula") -> "LaFormula":
        _same_space(self, other)
        return LaFormula(self.nvars, self.disjuncts + other.disjuncts, self.names or other.names)

    def normalized(self) -> "LaFormula":
        """Canonical atoms per disjunct; empty disjuncts and duplicates removed."""
        out, seen = [], set()
        for d in self.disjuncts:
            s = summarize(d)
            if any(b.empty() for b in s.values()):
                continue
            atoms = tuple(a for v in sorted(s) for a in s[v].atoms(v))
            if atoms not in seen:
                seen.add(atoms)
                out.append(atoms)
        return LaFormula(self.nvars, tuple(out), self.names)

    def holds(self, m: Sequence[int]) -> bool:
        return any(all(_holds(m[a.var], a.rel, a.const) for a in d) for d in self.disjuncts)

    def text(self) -> str:
        if not self.disjuncts:
            return "false"
        name = (lambda i: self.names[i]) if self.names else (lambda i: f"x{i + 1}")
        parts = []
        for d in self.disjuncts:
            parts.append(" & ".join(f"{name(a.var)} {a.rel} {a.const}" for a in d) or "true")
        return " | ".join(parts)

    __str__ = text


def _same_space(a, b):
    if a.nvars != b.nvars:
        raise ValueError(f"formulas over {a.nvars} and {b.nvars} variables")


def _holds(v, rel, c):
    return {"=": v == c, "!=": v != c, ">": v > c, ">=": v >= c, "<=": v <= c, "<": v < c}[rel]


@dataclass(frozen=True)
class VasTransition:
    id: str
    label: str
    guard: frozenset   # input places; each needs a token in the pre-state
    inc: frozenset
    dec: frozenset
    keep: frozenset

    def delta(self, i: int) -> int:
        return 1 if i in self.inc else -1 if i in self.dec else 0


@dataclass(frozen=True)
class VasSystem:
    vars: tuple
    init: LaFormula
    transitions: tuple

    @property
    def nvars(self) -> int:
        return len(self.vars)


def vas_from_net(net: PetriNet, m0: Marking) -> VasSystem:
    names = tuple(net.places)
    n = len(names)
    trs = []
    for i, t in enumerate(net.transitions):
        pre, post = set(net.pre[i]), set(net.post[i])
        inc, dec = post - pre, pre - post
        trs.append(VasTransition(t.id, t.label, frozenset(pre), frozenset(inc), frozenset(dec),
                                 frozenset(range(n)) - inc - dec))
    return VasSystem(names, LaFormula.from_marking(m0, names), tuple(trs))


def post_image_v(k: LaFormula, t: VasTransition, *, normalize: bool = True) -> LaFormula:
    """Post-image of ``k`` under ``t`` in post-state variables.

    Pre-state values are ``x - delta``: output places substitute ``x - 1``,
    input places ``x + 1``.  The enabling condition ``pre >= 1`` becomes
    ``x >= 1 + delta`` and the implicit non-negativity of a pre-state output
    place becomes ``x >= 1``.
    """
    out = []
    for d in k.disjuncts:
        atoms = [Atom(a.var, a.rel, a.const + t.delta(a.var)) for a in d]
        atoms += [Atom(i, ">=", 1 + t.delta(i)) for i in sorted(t.guard)]
        atoms += [Atom(j, ">=", 1) for j in sorted(t.inc)]
        out.append(tuple(atoms))
    res = LaFormula(k.nvars, tuple(out), k.names)
    return res.normalized() if normalize else res


def la_sat(k: LaFormula) -> tuple:
    """``(True, model)`` for the first satisfiable disjunct, else ``(False, None)``.

    The model takes the least admissible value of every variable.
    """
    for d in k.disjuncts:
        s = summarize(d)
        if any(b.empty() for b in s.values()):
            continue
        return True, tuple(s[i].least() if i in s else 0 for i in range(k.nvars))
    return False, None


def _covered(box: dict, others: list, variables: list) -> bool:
    """Is the box (var -> Bounds) contained in the union of ``others``?"""
    if any(b.empty() for b in box.values()):
        return True
    live = [o for o in others if not any(b.empty() for b in o.values())]
    if not live:
        return False
    for o in live:
        if all(_subset(box.get(v, FULL), o.get(v, FULL)) for v in o):
            return True
    # split on a variable where the candidates disagree
    for idx, v in enumerate(variables):
        sets = [o.get(v, FULL) for o in live]
        if all(s.full() for s in sets):
            continue
        mine = box.get(v, FULL)
        pts = set(mine.breakpoints())
        for s in sets:
            pts |= s.breakpoints()
        pts = sorted(p for p in pts if p >= mine.lo)
        cuts = pts + [None]
        rest = variables[idx + 1:]
        for lo, hi in zip(cuts, cuts[1:]):
            # region [lo, hi) has uniform membership for every set involved
            if lo not in mine:
                continue
            region = Bounds(lo, None if hi is None else hi - 1)
            sub = dict(box)
            sub[v] = region
            keep = [o for o in live if lo in o.get(v, FULL)]
            keep = [{w: b for w, b in o.items() if w != v} for o in keep]
            if not _covered(sub, keep, rest):
                return False
        return True
    return False


def _subset(a: Bounds, b: Bounds) -> bool:
    if a.empty():
        return True
    if a.lo < b.lo:
        return False
    if b.hi is not None and (a.hi is None or a.hi > b.hi):
        return False
    return not any(h in a for h in b.holes)


def la_entails(k1: LaFormula, k2: LaFormula) -> bool:
    """``k1 => k2`` over the non-negative integers."""
    _same_space(k1, k2)
    boxes2 = [summarize(d) for d in k2.disjuncts]
    variables = sorted({v for b in boxes2 for v in b})
    return all(_covered(summarize(d), boxes2, variables) for d in k1.disjuncts)


def la_negate(k: LaFormula) -> LaFormula:
    """Negation, pushed back into DNF (exponential in the worst case)."""
    res = LaFormula.true(k.nvars, k.names)
    for d in k.disjuncts:
        res = res & LaFormula(k.nvars, tuple((Atom(a.var, _NEGATE[a.rel], a.const),) for a in d),
                              k.names)
    return res
