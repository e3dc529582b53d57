"""Restricted BPEL (process/sequence/flow/invoke/receive) to workflow net."""
from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Union

from .errors import BpelError, DuplicateOperation, UnsupportedElement, XmlSyntax
from .wfnet import PetriNet, Transition

log = logging.getLogger(__name__)

FLOW_SPLIT = "flow-split"
FLOW_JOIN = "flow-join"
RESERVED_LABELS = frozenset({FLOW_SPLIT, FLOW_JOIN})

_ATTRS = {
    "process": {"name"},
    "sequence": {"name"},
    "flow": {"name"},
    "invoke": {"operation", "name"},
    "receive": {"operation", "name"},
}


@dataclass(frozen=True)
class Invoke:
    operation: str


@dataclass(frozen=True)
class Receive:
    operation: str


@dataclass(frozen=True)
class Sequence:
    children: tuple


@dataclass(frozen=True)
class Flow:
    children: tuple


Activity = Union[Invoke, Receive, Sequence, Flow]


@dataclass(frozen=True)
class ProcessAst:
    name: str
    body: Activity

    def operations(self) -> list:
        out = []

        def walk(a):
            if isinstance(a, (Invoke, Receive)):
                out.append(a.operation)
            else:
                for c in a.children:
                    walk(c)
        walk(self.body)
        return out


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_bpel(text: str, *, strict: bool = True) -> ProcessAst:
    """Parse the supported BPEL subset.

    In strict mode any other element or attribute raises
    ``UnsupportedElement``; lenient mode drops it with a warning.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlSyntax(str(exc)) from exc

    def reject(name, what="element"):
        if strict:
            raise UnsupportedElement(name, what)
        log.warning("ignoring unsupported %s %s", what, name)

    def check_attrs(el, tag):
        for attr in el.attrib:
            if _local(attr) not in _ATTRS[tag]:
                reject(f"{tag}@{_local(attr)}", "attribute")

    def activities(el):
        out = []
        for child in el:
            tag = _local(child.tag)
            if tag not in _ATTRS or tag == "process":
                reject(tag)
                continue
            out.append(convert(child, tag))
        return out

    def convert(el, tag):
        check_attrs(el, tag)
        if tag in ("invoke", "receive"):
            op = el.get("operation") or el.get("name")
            if not op:
                raise BpelError(f"<{tag}> without an operation attribute")
            for child in el:
                reject(_local(child.tag))
            return Invoke(op) if tag == "invoke" else Receive(op)
        kids = activities(el)
        if not kids:
            raise BpelError(f"<{tag}> must contain at least one activity")
        return Sequence(tuple(kids)) if tag == "sequence" else Flow(tuple(kids))

    if _local(root.tag) != "process":
        raise UnsupportedElement(_local(root.tag))
    check_attrs(root, "process")
    body = activities(root)
    if len(body) != 1:
        raise BpelError(f"<process> must contain exactly one activity, found {len(body)}")
    ast = ProcessAst(root.get("name", "process"), body[0])
    seen = set()
    for op in ast.operations():
        if op in seen:
            raise DuplicateOperation(op)
        if op in RESERVED_LABELS:
            raise BpelError(f"operation name {op!r} is reserved")
        seen.add(op)
    return ast


def translate(ast: ProcessAst) -> PetriNet:
    """Map the activity tree to an acyclic workflow net.

    Places are numbered ``p1, p2, ...`` in creation order: the entry place
    first, the exit place last.  Each flow with ``n`` branches gets one split
    and one join transition (ids ``flow<k>-split``/``flow<k>-join``) whose
    labels are the reserved, unguarded ``flow-split``/``flow-join``.
    """
    places: list = []
    transitions: list = []
    arcs: list = []
    flows = 0

    def new_place():
        places.append(f"p{len(places) + 1}")
        return places[-1]

    def add(tid, label, ins, outs):
        transitions.append(Transition(tid, label))
        arcs.extend((p, tid) for p in ins)
        arcs.extend((tid, p) for p in outs)

    def build(act, inp):
        nonlocal flows
        if isinstance(act, (Invoke, Receive)):
            out = new_place()
            add(act.operation, act.operation, [inp], [out])
            return out
        if isinstance(act, Sequence):
            cur = inp
            for child in act.children:
                cur = build(child, cur)
            return cur
        flows += 1
        k = flows
        heads = [new_place() for _ in act.children]
        add(f"flow{k}-split", FLOW_SPLIT, [inp], heads)
        tails = [build(child, head) for child, head in zip(act.children, heads)]
        out = new_place()
        add(f"flow{k}-join", FLOW_JOIN, tails, [out])
        return out

    build(ast.body, new_place())
    return PetriNet(places, transitions, arcs)


def bpel_to_net(text: str, *, strict: bool = True) -> PetriNet:
    return translate(parse_bpel(text, strict=strict))
