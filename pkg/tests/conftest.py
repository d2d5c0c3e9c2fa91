from __future__ import annotations

from pathlib import Path

import pytest

from mbqc_circuits.corpus import gflow_corpus
from mbqc_circuits.flow import find_flow

GOLDEN = Path(__file__).parent / "golden"
CORPUS_SEED = 0
CORPUS_SIZE = 200


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--update-golden", action="store_true", help="rewrite golden files from current output")


@pytest.fixture
def golden(request: pytest.FixtureRequest):
    """Compare text with ``tests/golden/<name>``; rewrite it under ``--update-golden``."""
    update = request.config.getoption("--update-golden")

    def check(name: str, text: str) -> None:
        path = GOLDEN / name
        if update:
            path.write_text(text, encoding="utf-8")
        assert path.exists(), f"missing golden file {name}; run pytest --update-golden"
        assert text == path.read_text(encoding="utf-8")

    return check


@pytest.fixture(scope="session")
def corpus():
    return gflow_corpus(CORPUS_SEED, CORPUS_SIZE)


@pytest.fixture(scope="session")
def corpus_flows(corpus):
    """Causal flow of each corpus entry, or None."""
    return [find_flow(e.graph) for e in corpus]


@pytest.fixture(scope="session")
def small_corpus():
    """Graphs small enough for exhaustive enumeration."""
    return gflow_corpus(7, 24, max_vertices=7)


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
