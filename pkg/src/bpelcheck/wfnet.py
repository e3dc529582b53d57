"""Petri nets and workflow nets: data model, firing semantics, explicit exploration.

Markings are plain tuples of token counts aligned with ``PetriNet.places``;
place ``i`` in that order is VAS variable ``x_{i+1}`` downstream.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional

from .errors import (CyclicNet, MalformedNet, NoUniqueSink, NoUniqueSource,
                     NotEnabled, StateBudgetExceeded, TransitionNotCovered,
                     UnknownTransition)

Marking = tuple  # tuple[int, ...], one count per place in net order

DEFAULT_STATE_BUDGET = 1_000_000


@dataclass(frozen=True)
class Transition:
    id: str
    label: str


@dataclass(frozen=True)
class PetriNet:
    places: tuple
    transitions: tuple
    arcs: tuple

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(
            t if isinstance(t, Transition) else Transition(*t) for t in self.transitions))
        object.__setattr__(self, "arcs", tuple(tuple(a) for a in self.arcs))
        places = set(self.places)
        tids = [t.id for t in self.transitions]
        if len(places) != len(self.places):
            raise MalformedNet("duplicate place identifier")
        if len(set(tids)) != len(tids):
            raise MalformedNet("duplicate transition identifier")
        if places & set(tids):
            raise MalformedNet(f"places and transitions overlap: {sorted(places & set(tids))}")
        tset = set(tids)
        seen = set()
        for src, dst in self.arcs:
            if (src, dst) in seen:
                raise MalformedNet(f"duplicate arc {src} -> {dst}")
            seen.add((src, dst))
            if src in places and dst in tset or src in tset and dst in places:
                continue
            for end in (src, dst):
                if end not in places and end not in tset:
                    raise MalformedNet(f"arc endpoint {end!r} is not declared")
            raise MalformedNet(f"arc {src} -> {dst} does not connect a place and a transition")

    @cached_property
    def place_index(self) -> dict:
        return {p: i for i, p in enumerate(self.places)}

    @cached_property
    def transition_index(self) -> dict:
        return {t.id: i for i, t in enumerate(self.transitions)}

    @cached_property
    def pre(self) -> tuple:
        """Input place indices per transition index."""
        ti, pi = self.transition_index, self.place_index
        out = [[] for _ in self.transitions]
        for src, dst in self.arcs:
            if dst in ti:
                out[ti[dst]].append(pi[src])
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def post(self) -> tuple:
        """Output place indices per transition index."""
        ti, pi = self.transition_index, self.place_index
        out = [[] for _ in self.transitions]
        for src, dst in self.arcs:
            if src in ti:
                out[ti[src]].append(pi[dst])
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def successors(self) -> dict:
        succ = {n: [] for n in self.places}
        succ.update({t.id: [] for t in self.transitions})
        for src, dst in self.arcs:
            succ[src].append(dst)
        return succ

    @cached_property
    def predecessors(self) -> dict:
        pred = {n: [] for n in self.places}
        pred.update({t.id: [] for t in self.transitions})
        for src, dst in self.arcs:
            pred[dst].append(src)
        return pred

    def tindex(self, t) -> int:
        if isinstance(t, int):
            if 0 <= t < len(self.transitions):
                return t
            raise UnknownTransition(t)
        try:
            return self.transition_index[t]
        except KeyError:
            raise UnknownTransition(t) from None

    def marking(self, tokens: Mapping[str, int] | None = None) -> Marking:
        """Build a marking from a partial ``{place: count}`` map (missing places are empty)."""
        m = [0] * len(self.places)
        for p, c in (tokens or {}).items():
            if p not in self.place_index:
                raise MalformedNet(f"marking mentions unknown place {p!r}")
            if c < 0:
                raise MalformedNet(f"negative token count for {p!r}")
            m[self.place_index[p]] = int(c)
        return tuple(m)

    def marking_dict(self, m: Marking, *, sparse: bool = True) -> dict:
        return {p: c for p, c in zip(self.places, m) if c or not sparse}


@dataclass(frozen=True)
class WfNetInfo:
    source: str
    sink: str
    acyclic: bool
    max_transition_path_length: Optional[int]
    longest_structural_path: Optional[int]


def enabled(net: PetriNet, m: Marking, t) -> bool:
    return all(m[p] >= 1 for p in net.pre[net.tindex(t)])


def fire(net: PetriNet, m: Marking, t) -> Marking:
    i = net.tindex(t)
    if not all(m[p] >= 1 for p in net.pre[i]):
        raise NotEnabled(f"{net.transitions[i].id} is not enabled")
    return _fire(net, m, i)


def _fire(net, m, i):
    out = list(m)
    for p in net.pre[i]:
        out[p] -= 1
    for p in net.post[i]:
        out[p] += 1
    return tuple(out)


def enabled_transitions(net: PetriNet, m: Marking) -> list:
    return [i for i, pre in enumerate(net.pre) if all(m[p] >= 1 for p in pre)]


def is_acyclic(net: PetriNet) -> bool:
    indeg = {n: len(v) for n, v in net.predecessors.items()}
    queue = deque(n for n, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        n = queue.popleft()
        seen += 1
        for s in net.successors[n]:
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    return seen == len(indeg)


def _reach(start, edges):
    seen = {start}
    stack = [start]
    while stack:
        for nxt in edges[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def longest_structural_path(net: PetriNet) -> int:
    """Largest number of transitions on any directed path of the (acyclic) flow graph."""
    if not is_acyclic(net):
        raise CyclicNet("flow graph has a cycle")
    tids = set(net.transition_index)
    memo: dict = {}

    def longest(n):
        if n not in memo:
            memo[n] = (n in tids) + max((longest(s) for s in net.successors[n]), default=0)
        return memo[n]

    return max((longest(n) for n in net.successors), default=0)


def longest_run(net: PetriNet, m0: Marking, budget: int = DEFAULT_STATE_BUDGET) -> int:
    """Length of the longest firing sequence from ``m0``; needs a finite reachability graph."""
    if not is_acyclic(net):
        raise CyclicNet("longest run is only computed for acyclic nets")
    memo: dict = {}

    def visit(m):
        # iterative post-order DFS to stay clear of the recursion limit
        stack = [(m, iter(enabled_transitions(net, m)))]
        best = {m: 0}
        while stack:
            cur, it = stack[-1]
            advanced = False
            for i in it:
                nxt = _fire(net, cur, i)
                if nxt in memo:
                    best[cur] = max(best[cur], memo[nxt] + 1)
                    continue
                if nxt in best:
                    raise CyclicNet("marking repeats along a run")
                if len(memo) + len(best) > budget:
                    raise StateBudgetExceeded(f"more than {budget} markings")
                best[nxt] = 0
                stack.append((nxt, iter(enabled_transitions(net, nxt))))
                advanced = True
                break
            if not advanced:
                stack.pop()
                memo[cur] = best.pop(cur)
                if stack:
                    parent = stack[-1][0]
                    best[parent] = max(best[parent], memo[cur] + 1)
        return memo[m]

    return visit(tuple(m0))


def validate_wf_net(net: PetriNet, m0: Marking | None = None, *, require_acyclic: bool = False,
                    budget: int = DEFAULT_STATE_BUDGET) -> WfNetInfo:
    """Check the workflow-net conditions and compute the run-length bound.

    ``max_transition_path_length`` is the length of the longest firing
    sequence from ``m0`` (one token on the source when omitted).  For
    concurrent nets it exceeds the longest structural path, which is
    reported separately.
    """
    sources = [p for p in net.places if not net.predecessors[p]]
    sinks = [p for p in net.places if not net.successors[p]]
    if len(sources) != 1:
        raise NoUniqueSource(f"expected one place with empty preset, found {sources}")
    if len(sinks) != 1:
        raise NoUniqueSink(f"expected one place with empty postset, found {sinks}")
    source, sink = sources[0], sinks[0]
    forward = _reach(source, net.successors)
    backward = _reach(sink, net.predecessors)
    for t in net.transitions:
        if t.id not in forward or t.id not in backward:
            raise TransitionNotCovered(t.id)
    acyclic = is_acyclic(net)
    if not acyclic:
        if require_acyclic:
            raise CyclicNet("workflow net has a cycle")
        return WfNetInfo(source, sink, False, None, None)
    if m0 is None:
        m0 = net.marking({source: 1})
    return WfNetInfo(source, sink, True, longest_run(net, m0, budget), longest_structural_path(net))


def explicit_reachable(net: PetriNet, m0: Marking, depth: int,
                       budget: int = DEFAULT_STATE_BUDGET) -> set:
    """All markings reachable from ``m0`` in at most ``depth`` firings (breadth-first)."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    seen = {tuple(m0)}
    frontier = [tuple(m0)]
    for _ in range(depth):
        nxt = []
        for m in frontier:
            for i in enabled_transitions(net, m):
                m2 = _fire(net, m, i)
                if m2 not in seen:
                    seen.add(m2)
                    nxt.append(m2)
                    if len(seen) > budget:
                        raise StateBudgetExceeded(f"more than {budget} markings")
        if not nxt:
            break
        frontier = nxt
    return seen


def firing_sequences(net: PetriNet, m0: Marking, max_len: int | None = None) -> Iterator[tuple]:
    """Every firing sequence (as transition-id tuples, empty one included) up to ``max_len``."""
    stack = [((), tuple(m0))]
    while stack:
        seq, m = stack.pop()
        yield seq
        if max_len is not None and len(seq) >= max_len:
            continue
        for i in reversed(enabled_transitions(net, m)):
            stack.append((seq + (net.transitions[i].id,), _fire(net, m, i)))


# -- JSON -------------------------------------------------------------------

def net_from_dict(doc: dict) -> tuple:
    """Parse the net JSON document; returns ``(net, initial_marking)``."""
    try:
        places = list(doc["places"])
        transitions = [Transition(t["id"], t.get("label", t["id"])) if isinstance(t, dict)
                       else Transition(t, t) for t in doc["transitions"]]
        arcs = [tuple(a) for a in doc.get("arcs", [])]
    except (KeyError, TypeError) as exc:
        raise MalformedNet(f"bad net document: {exc}") from exc
    for a in arcs:
        if len(a) != 2:
            raise MalformedNet(f"arc {a!r} must have two endpoints")
    net = PetriNet(places, transitions, arcs)
    init = doc.get("initial_marking")
    if init is None:
        sources = [p for p in net.places if not net.predecessors[p]]
        init = {sources[0]: 1} if len(sources) == 1 else {}
    return net, net.marking(init)


def net_to_dict(net: PetriNet, m0: Marking | None = None) -> dict:
    doc = {
        "places": list(net.places),
        "transitions": [{"id": t.id, "label": t.label} for t in net.transitions],
        "arcs": [list(a) for a in net.arcs],
    }
    if m0 is not None:
        doc["initial_marking"] = net.marking_dict(m0)
    return doc


def dumps_net(net: PetriNet, m0: Marking | None = None) -> str:
    return json.dumps(net_to_dict(net, m0), indent=2) + "\n"


def loads_net(text: str) -> tuple:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedNet(f"invalid JSON: {exc}") from exc
    return net_from_dict(doc)


def series_net(labels: Iterable[str]) -> PetriNet:
    """A plain sequence ``p0 -t1-> p1 -t2-> ... `` (handy for tests and demos)."""
    labels = list(labels)
    places = [f"p{i}" for i in range(len(labels) + 1)]
    arcs = []
    for i, lab in enumerate(labels):
        arcs += [(places[i], lab), (lab, places[i + 1])]
    return PetriNet(places, [Transition(lab, lab) for lab in labels], arcs)
