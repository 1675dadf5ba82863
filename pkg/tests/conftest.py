from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: acceptance(number, passed, detail)."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number, passed, detail):
        lines.append((number, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(ACCEPTANCE, []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in lines:
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
