from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chrkit.cli import corpus_dir  # noqa: E402
from chrkit.syntax import Program, parse_program  # noqa: E402

_ACCEPTANCE: list[str] = []


def corpus_program(name: str) -> Program:
    return parse_program((corpus_dir() / f"{name}.chr").read_text(encoding="utf-8"))


@pytest.fixture
def corpus():
    return corpus_program


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(line: str) -> None:
        print(line)
        _ACCEPTANCE.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
