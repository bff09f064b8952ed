import json
from pathlib import Path

import pytest

ORACLE_PATH = Path(__file__).with_name("oracle_values.json")
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def oracle() -> dict:
    """High-precision reference values produced by gen_oracles.py."""
    return json.loads(ORACLE_PATH.read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
