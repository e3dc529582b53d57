"""A small CDCL SAT solver (two watched literals, 1UIP learning, VSIDS, Luby restarts).

Literals are non-zero ints in DIMACS style.  The solver is incremental:
clauses may be added between ``solve`` calls and assumptions are passed
per call.
"""
from __future__ import annotations

import heapq
from typing import Iterable, Optional


def luby(i: int) -> int:
    """``i``-th element (1-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class Solver:
    def __init__(self):
        self.nvars = 0
        self.clauses: list = []
        self.watches: dict = {}
        self.val = [0]          # per variable: 1 true, -1 false, 0 unassigned
        self.level = [0]
        self.reason: list = [None]
        self.activity = [0.0]
        self.phase = [False]
        self.trail: list = []
        self.trail_lim: list = []
        self.qhead = 0
        self.heap: list = []
        self.inc = 1.0
        self.ok = True
        self.model: Optional[list] = None
        self.conflicts = 0

    # -- construction -----------------------------------------------------------
    def new_var(self, phase: bool = False) -> int:
        self.nvars += 1
        v = self.nvars
        self.val.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(phase)
        self.watches[v] = []
        self.watches[-v] = []
        heapq.heappush(self.heap, (0.0, v))
        return v

    def set_phase(self, lit: int):
        self.phase[abs(lit)] = lit > 0

    def _value(self, lit: int) -> int:
        v = self.val[abs(lit)]
        return v if lit > 0 else -v

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause at level 0; returns False once the formula is trivially unsatisfiable."""
        if not self.ok:
            return False
        self._cancel(0)
        seen, out = set(), []
        for lit in lits:
            if -lit in seen:
                return True
            if lit in seen:
                continue
            val = self._value(lit)
            if val > 0 and self.level[abs(lit)] == 0:
                return True
            if val < 0 and self.level[abs(lit)] == 0:
                continue
            seen.add(lit)
            out.append(lit)
        if not out:
            self.ok = False
            return False
        if len(out) == 1:
            self._assign(out[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self._attach(out)
        return True

    def _attach(self, clause: list) -> int:
        idx = len(self.clauses)
        self.clauses.append(clause)
        self.watches[clause[0]].append(idx)
        self.watches[clause[1]].append(idx)
        return idx

    # -- search -----------------------------------------------------------------
    def _assign(self, lit: int, reason):
        v = abs(lit)
        self.val[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        clauses, watches, val = self.clauses, self.watches, self.val
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = val[first] if first > 0 else -val[-first]
                if fv > 0:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    lv = val[lk] if lk > 0 else -val[-lk]
                    if lv >= 0:
                        c[1], c[k] = lk, false_lit
                        watches[lk].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if fv < 0:
                        while i < n:
                            ws[j] = ws[i]
                            i += 1
                            j += 1
                        del ws[j:]
                        self.qhead = len(self.trail)
                        return ci
                    self._assign(first, ci)
            del ws[j:]
        return None

    def _bump(self, v: int):
        self.activity[v] += self.inc
        if self.activity[v] > 1e100:
            for u in range(1, self.nvars + 1):
                self.activity[u] *= 1e-100
            self.inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1) if not self.val[u]]
            heapq.heapify(self.heap)
        elif not self.val[v]:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, confl: int):
        seen = set()
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur = len(self.trail_lim)
        clause = self.clauses[confl]
        while True:
            for q in (clause if p is None else clause[1:]):
                v = abs(q)
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.clauses[self.reason[abs(p)]]
        learnt[0] = -p
        # drop literals whose reason is already covered by the clause
        keep = [learnt[0]]
        for q in learnt[1:]:
            r = self.reason[abs(q)]
            if r is None or any(abs(x) not in seen and self.level[abs(x)] > 0
                                for x in self.clauses[r][1:]):
                keep.append(q)
        learnt = keep
        if len(learnt) == 1:
            back = 0
        else:
            mi = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            back = self.level[abs(learnt[1])]
        self.inc *= 1.05
        return learnt, back

    def _cancel(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.phase[v] = lit > 0
            self.val[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _pick(self) -> int:
        heap, val, act = self.heap, self.val, self.activity
        while heap:
            a, v = heapq.heappop(heap)
            if not val[v] and -a == act[v]:
                return v
        return 0

    def solve(self, assumptions: Iterable[int] = (), conflict_budget: Optional[int] = None
              ) -> Optional[bool]:
        """True/False, or None when ``conflict_budget`` conflicts were spent.

        ``model`` keeps the last satisfying assignment found, so it survives
        later unsatisfiable calls.
        """
        if not self.ok:
            return False
        assumptions = list(assumptions)
        self._cancel(0)
        if self._propagate() is not None:
            self.ok = False
            return False
        restarts, spent = 1, 0
        limit = 100 * luby(restarts)
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                spent += 1
                if len(self.trail_lim) == 0:
                    self.ok = False
                    return False
                learnt, back = self._analyze(confl)
                self._cancel(back)
                if len(learnt) == 1:
                    self._assign(learnt[0], None)
                else:
                    self._assign(learnt[0], self._attach(learnt))
                if conflict_budget is not None and spent >= conflict_budget:
                    self._cancel(0)
                    return None
                continue
            if spent >= limit:
                restarts += 1
                limit = spent + 100 * luby(restarts)
                self._cancel(0)
                continue
            lvl = len(self.trail_lim)
            if lvl < len(assumptions):
                a = assumptions[lvl]
                av = self._value(a)
                if av < 0:
                    self._cancel(0)
                    return False
                self.trail_lim.append(len(self.trail))
                if av == 0:
                    self._assign(a, None)
                continue
            v = self._pick()
            if v == 0:
                self.model = [False] + [self.val[u] > 0 for u in range(1, self.nvars + 1)]
                self._cancel(0)
                return True
            self.trail_lim.append(len(self.trail))
            self._assign(v if self.phase[v] else -v, None)

    def value(self, lit: int) -> bool:
        """Truth of ``lit`` in the last model."""
        b = self.model[abs(lit)]
        return b if lit > 0 else not b
