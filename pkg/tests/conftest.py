import os
import shutil

import pytest
from hypothesis import HealthCheck, settings

from bpelcheck.engine import build_system
from bpelcheck.synth import po_net, po_policy

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: list = []


def solver_available() -> bool:
    return shutil.which(os.environ.get("BPELCHECK_SOLVER") or "z3") is not None


@pytest.fixture(scope="session")
def net():
    return po_net()


@pytest.fixture(scope="session")
def policy():
    return po_policy()


@pytest.fixture(scope="session")
def system(net, policy):
    return build_system(net, policy)


@pytest.fixture(scope="session")
def system_neg(net):
    return build_system(net, po_policy(without=("u1", "u2")))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
