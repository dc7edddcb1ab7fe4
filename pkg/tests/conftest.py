from __future__ import annotations

import socket
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from invplan.evaluation import load_corpus, prepare_stimulus  # noqa: E402
from invplan.translate import FixtureStore  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def fixtures():
    return FixtureStore.load()


@pytest.fixture(scope="session")
def prepared(corpus, fixtures):
    """Every corpus stimulus translated from its fixture, sampled (seed 0) and compiled."""
    return {s.id: prepare_stimulus(s, fixtures) for s in corpus}


@pytest.fixture
def no_network(monkeypatch):
    """Fail loudly if anything tries to open a socket."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
