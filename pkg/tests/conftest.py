import textwrap
from pathlib import Path

import pytest

from pagesel.ir import parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
REGRESSION = sorted(p for p in FIXTURES.glob("*.ir"))

_acceptance_lines = []


def prog(text, **kw):
    return parse_program(textwrap.dedent(text), **kw)


@pytest.fixture
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
