from __future__ import annotations

import sys
from pathlib import Path

import pytest

from gc2.problem import pad_signature, parse_problem

sys.path.insert(0, str(Path(__file__).parent))

P0_TEXT = "alpha true\nguard f true\ncount f 1\nend\n"
P1_TEXT = "alpha true\nguard f (not (f y x))\ncount f 1\nend\n"
CONTRA_TEXT = "unary c\nbinary f\nalpha (and (c x) (not (c x)))\nguard f true\ncount f 1\nend\n"


@pytest.fixture(scope="session")
def P0():
    return pad_signature(parse_problem(P0_TEXT))


@pytest.fixture(scope="session")
def P1():
    return pad_signature(parse_problem(P1_TEXT))


@pytest.fixture(scope="session")
def contra():
    return pad_signature(parse_problem(CONTRA_TEXT))


@pytest.fixture(scope="session")
def psi_inf():
    from gc2.normalizer import PSI_INF, normalize
    from gc2.syntax import parse_formula

    sig, f = parse_formula(PSI_INF)
    [prob] = normalize(f, sig)
    return prob


@pytest.fixture(scope="session")
def psi_inf_oracle6(psi_inf):
    from gc2.structures import oracle_finsat

    return oracle_finsat(psi_inf, 6)


# --- acceptance summary ---------------------------------------------------------

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion, then assert it."""

    def done(ok: bool, detail: str) -> None:
        request.config.stash[ACCEPTANCE][request.node.nodeid] = detail
        assert ok, detail

    return done


def pytest_terminal_summary(terminalreporter, config):
    details = config.stash.get(ACCEPTANCE, {})
    reports = [
        r
        for key in ("passed", "failed")
        for r in terminalreporter.stats.get(key, [])
        if r.when == "call" and "test_acceptance.py::test_criterion" in r.nodeid
    ]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1]
        verdict = "PASS" if r.passed else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}: {details.get(r.nodeid, 'no result recorded')}")
