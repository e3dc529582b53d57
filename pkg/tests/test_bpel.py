import pytest
from hypothesis import given
from hypothesis import strategies as st

from bpelcheck.bpel import (FLOW_JOIN, FLOW_SPLIT, Flow, Invoke, ProcessAst, Receive, Sequence,
                            bpel_to_net, parse_bpel, translate)
from bpelcheck.errors import BpelError, DuplicateOperation, UnsupportedElement, XmlSyntax
from bpelcheck.synth import fixture_text
from bpelcheck.wfnet import fire, validate_wf_net


def wrap(body: str) -> str:
    return f"<process name='t'>{body}</process>"


def test_po_translation(net):
    assert bpel_to_net(fixture_text("po.bpel")) == net
    assert len(net.places) == 10 and len(net.transitions) == 8
    assert [t.id for t in net.transitions] == [
        "crtPO", "apprPO", "flow1-split", "signGRN", "ctrsignGRN", "crtPay", "flow1-join", "apprPay"]


def test_single_invoke():
    net = bpel_to_net(wrap("<sequence><invoke operation='a'/></sequence>"))
    assert len(net.places) == 2 and [t.id for t in net.transitions] == ["a"]


def test_flow_of_two():
    net = bpel_to_net(wrap("<flow><invoke operation='a'/><invoke operation='b'/></flow>"))
    assert len(net.places) == 6 and len(net.transitions) == 4
    labels = [t.label for t in net.transitions]
    assert labels.count(FLOW_SPLIT) == 1 and labels.count(FLOW_JOIN) == 1


def test_unsupported_element_strict_and_lenient():
    text = wrap("<sequence><while/><invoke operation='a'/></sequence>")
    with pytest.raises(UnsupportedElement):
        parse_bpel(text)
    ast = parse_bpel(text, strict=False)
    assert ast.operations() == ["a"]


def test_unsupported_attribute():
    text = wrap("<invoke operation='a' partnerLink='x'/>")
    with pytest.raises(UnsupportedElement):
        parse_bpel(text)
    assert parse_bpel(text, strict=False).body == Invoke("a")


def test_namespaces_are_ignored():
    text = ("<bp:process xmlns:bp='http://docs.oasis-open.org/wsbpel/2.0/process/executable'>"
            "<bp:receive operation='a'/></bp:process>")
    assert parse_bpel(text).body == Receive("a")


@pytest.mark.parametrize("text,exc", [
    ("<process><sequence>", XmlSyntax),
    ("<sequence/>", UnsupportedElement),
    (wrap(""), BpelError),
    (wrap("<sequence/>"), BpelError),
    (wrap("<invoke/>"), BpelError),
    (wrap("<sequence><invoke operation='a'/><invoke operation='a'/></sequence>"), DuplicateOperation),
    (wrap("<invoke operation='flow-split'/>"), BpelError),
])
def test_rejections(text, exc):
    with pytest.raises(exc):
        parse_bpel(text)


def _activities(depth=3):
    leaf = st.builds(lambda k: ("leaf", k), st.booleans())
    return st.recursive(
        leaf,
        lambda inner: st.tuples(st.sampled_from(["seq", "flow"]), st.lists(inner, min_size=1, max_size=3)),
        max_leaves=8)


def _to_ast(raw, counter):
    if raw[0] == "leaf":
        counter.append(0)
        op = f"op{len(counter)}"
        return Receive(op) if raw[1] else Invoke(op)
    kids = tuple(_to_ast(r, counter) for r in raw[1])
    return Sequence(kids) if raw[0] == "seq" else Flow(kids)


def _stats(a):
    """(operations, flows, flow branches) of an activity tree."""
    if isinstance(a, (Invoke, Receive)):
        return 1, 0, 0
    ops, flows, branches = 0, int(isinstance(a, Flow)), len(a.children) if isinstance(a, Flow) else 0
    for c in a.children:
        o, f, b = _stats(c)
        ops, flows, branches = ops + o, flows + f, branches + b
    return ops, flows, branches


@given(_activities())
def test_translation_shape(raw):
    ast = ProcessAst("p", _to_ast(raw, []))
    net = translate(ast)
    ops, flows, branches = _stats(ast.body)
    assert len(net.transitions) == ops + 2 * flows
    assert len(net.places) == 1 + ops + branches + flows
    info = validate_wf_net(net, require_acyclic=True)
    # every transition fires exactly once on any complete run
    assert info.max_transition_path_length == len(net.transitions)
    m = net.marking({info.source: 1})
    fired = set()
    while len(fired) < len(net.transitions):
        t = next(t for i, t in enumerate(net.transitions)
                 if t.id not in fired and all(m[p] for p in net.pre[i]))
        m = fire(net, m, t.id)
        fired.add(t.id)
    assert m == net.marking({info.sink: 1})
