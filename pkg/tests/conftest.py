from __future__ import annotations

import pytest

from kgqa import fixtures
from kgqa.retriever import RetrievalConfig, retrieve_subgraph
from kgqa.scoring import LexicalScorer

NATO_QUESTION = "Where are the NATO headquarters located?"


@pytest.fixture(scope="session")
def nato_store():
    return fixtures.load_nato_store()


@pytest.fixture(scope="session")
def nato_example():
    return fixtures.nato_question()


@pytest.fixture()
def lexical():
    return LexicalScorer()


@pytest.fixture(scope="session")
def nato_subgraph(nato_store):
    return retrieve_subgraph(
        nato_store, NATO_QUESTION, ["NATO"], RetrievalConfig(k=2, depth=2), LexicalScorer()
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and report.when == "call":
                name = nodeid.split("::")[-1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
