import json
import subprocess
import sys
from pathlib import Path

import pytest
from conftest import solver_available

import bpelcheck
from bpelcheck.cli import (EXIT_GROUNDING, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_INVALID,
                           EXIT_NODE_BUDGET, EXIT_OK, EXIT_PARSE, EXIT_REACHABLE,
                           main)
from bpelcheck.engine import WitnessStep, build_system, replay_witness, soundness_goal
from bpelcheck.rbac.policy import load_policy
from bpelcheck.wfnet import loads_net

DATA = Path(bpelcheck.__file__).parent / "data"
BPEL = str(DATA / "po.bpel")
POLICY = str(DATA / "po_policy.json")
POLICY_NEG = str(DATA / "po_policy_no_u1u2.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_translate(capsys, net):
    code, out, _ = run(capsys, "translate", BPEL)
    assert code == EXIT_OK
    net2, m0 = loads_net(out)
    assert net2 == net and m0 == net.marking({"p1": 1})


def test_translate_errors(capsys, tmp_path):
    bad = tmp_path / "bad.bpel"
    bad.write_text("<process><sequence>")
    assert run(capsys, "translate", str(bad))[0] == EXIT_PARSE
    loop = tmp_path / "loop.bpel"
    loop.write_text("<process><while/></process>")
    assert run(capsys, "translate", str(loop))[0] == EXIT_PARSE
    # lenient mode drops the loop, leaving an empty process
    assert run(capsys, "translate", "--lenient", str(loop))[0] == EXIT_PARSE
    skip = tmp_path / "skip.bpel"
    skip.write_text("<process><sequence><while/><invoke operation='a'/></sequence></process>")
    assert run(capsys, "translate", str(skip))[0] == EXIT_PARSE
    code, out, _ = run(capsys, "translate", "--lenient", str(skip))
    assert code == EXIT_OK and len(loads_net(out)[0].places) == 2
    # a net that is not a workflow net fails validation
    two = tmp_path / "two.json"
    two.write_text(json.dumps({"places": ["a", "b", "c"], "transitions": [{"id": "t", "label": "t"}],
                               "arcs": [["a", "t"], ["b", "t"], ["t", "c"]]}))
    assert run(capsys, "verify", str(two), POLICY, "--soundness")[0] == EXIT_INVALID
    assert run(capsys, "translate", str(tmp_path / "missing.bpel"))[0] == EXIT_INPUT


def test_verify_soundness(capsys, system):
    code, out, _ = run(capsys, "verify", BPEL, POLICY, "--soundness")
    assert code == EXIT_REACHABLE
    doc = json.loads(out)
    assert doc["verdict"]["status"] == "reachable"
    assert doc["system"]["places"] == 10 and doc["system"]["longest_run"] == 8
    steps = [WitnessStep(**s) for s in doc["verdict"]["witness"]]
    assert replay_witness(system, steps, soundness_goal(system), strict=True)


def test_verify_negative(capsys):
    code, out, _ = run(capsys, "verify", BPEL, POLICY_NEG, "--soundness", "--no-timing")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["verdict"]["status"] == "unreachable" and "timing" not in doc


def test_verify_goals(capsys, tmp_path):
    # separation of duty: nobody both approves and signs
    sod = "exists x . xcd(x, apprPO) & xcd(x, signGRN)"
    assert run(capsys, "verify", BPEL, POLICY, "--goal-pm", sod)[0] == EXIT_OK
    goal = tmp_path / "goal.json"
    goal.write_text(json.dumps({"vas": "p9 >= 1", "pm": "exists x . xcd(x, crtPay)"}))
    assert run(capsys, "verify", BPEL, POLICY, "--goal", str(goal))[0] == EXIT_REACHABLE
    assert run(capsys, "verify", BPEL, POLICY, "--goal", '{"vas": "p10 >= 2"}')[0] == EXIT_OK
    assert run(capsys, "verify", BPEL, POLICY, "--goal-vas", "p10 >= 1 +")[0] == EXIT_INPUT
    assert run(capsys, "verify", BPEL, POLICY, "--soundness", "--goal-vas", "p1 = 1")[0] == EXIT_INPUT
    assert run(capsys, "verify", BPEL, POLICY)[0] == EXIT_INPUT


def test_verify_limits(capsys):
    assert run(capsys, "verify", BPEL, POLICY, "--soundness", "--node-budget", "1")[0] == EXIT_NODE_BUDGET
    assert run(capsys, "verify", BPEL, POLICY, "--soundness", "--depth", "3")[0] == EXIT_INCONCLUSIVE
    code = run(capsys, "verify", BPEL, POLICY, "--goal-pm",
               "forall a:user, b:user, c:user, d:user, e:user, f:user . a = b | a = c | a = d",
               "--grounding-budget", "10")[0]
    assert code == EXIT_GROUNDING


def test_verify_outputs(capsys, tmp_path):
    rep, dot = tmp_path / "r.json", tmp_path / "t.dot"
    code, out, _ = run(capsys, "verify", BPEL, POLICY, "--soundness", "--report", str(rep),
                       "--dot", str(dot))
    assert code == EXIT_REACHABLE and out == ""
    assert json.loads(rep.read_text())["verdict"]["status"] == "reachable"
    assert dot.read_text().startswith("digraph")


def test_bad_inputs(capsys, tmp_path):
    assert run(capsys, "verify", BPEL, str(tmp_path / "none.json"), "--soundness")[0] == EXIT_INPUT
    broken = tmp_path / "p.json"
    broken.write_text("{")
    assert run(capsys, "verify", BPEL, str(broken), "--soundness")[0] == EXIT_INPUT
    # a constraint on an action without a permission is rejected unless --lenient
    doc = json.loads(Path(POLICY).read_text())
    doc["constraints"].append({"domain_kind": "user", "t1": "apprPO", "t2": "crtPO", "relation": "!="})
    odd = tmp_path / "odd.json"
    odd.write_text(json.dumps(doc))
    assert run(capsys, "verify", BPEL, str(odd), "--soundness")[0] == EXIT_INVALID
    assert run(capsys, "verify", BPEL, str(odd), "--soundness", "--lenient")[0] == EXIT_OK


def test_net_json_input(capsys, tmp_path):
    code, out, _ = run(capsys, "translate", BPEL)
    path = tmp_path / "po.json"
    path.write_text(out)
    assert run(capsys, "verify", str(path), POLICY, "--soundness")[0] == EXIT_REACHABLE


def test_dump_tree(capsys):
    code, out, _ = run(capsys, "dump-tree", BPEL, POLICY, "--depth", "2", "--width", "20")
    assert code == EXIT_OK
    assert out.count("->") == 2 and out.count("[label=\"n") == 3


def test_export_smt(capsys, tmp_path):
    code, _, _ = run(capsys, "export-smt", BPEL, POLICY, "--soundness", "-o", str(tmp_path))
    assert code == EXIT_OK
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    files = {p.name for p in tmp_path.glob("*.smt2")}
    # one node per feasible transition sequence: 18 nodes, two obligations each
    assert len(manifest) == 18 and len(files) == 36
    assert {e[part]["file"] for e in manifest for part in ("vas", "pm")} == files
    assert sum(e["pm"]["expected"] == "sat" and e["vas"]["expected"] == "sat" for e in manifest) == 3


def test_policy_check(capsys, policy):
    code, out, _ = run(capsys, "policy-check", POLICY)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert ["Manager", "FinClerk"] in doc["role_order_closure"]
    assert doc["unguarded_actions"] == ["crtPO", "flow-split", "flow-join"]
    assert all((p in perms) == policy.can_get(u, p)
               for u, perms in doc["effective_permissions"].items() for p in policy.permissions)
    assert run(capsys, "policy-check", BPEL)[0] == EXIT_INPUT


@pytest.mark.skipif(not solver_available(), reason="no SMT solver on PATH")
def test_cross_check(capsys):
    code, out, _ = run(capsys, "verify", BPEL, POLICY, "--soundness", "--cross-check",
                       "--cross-check-limit", "10")
    assert code == EXIT_REACHABLE
    check = json.loads(out)["cross_check"]
    assert check["mismatches"] == [] and check["agree"] == check["jobs"] > 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bpelcheck", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and bpelcheck.__version__ in proc.stdout


def test_policy_fixtures_load():
    pol = load_policy(Path(POLICY_NEG).read_text())
    assert "u1" not in pol.users
    from bpelcheck.synth import po_net
    build_system(po_net(), pol)
