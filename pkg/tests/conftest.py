import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "survey20"

_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""
    def _record(criterion: str, ok: bool, detail: str = "", status: str | None = None):
        status = status or ("PASS" if ok else "FAIL")
        _acceptance_lines.append(f"{criterion}: {status}" + (f"  ({detail})" if detail else ""))
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def fixture_dir():
    return FIXTURE
