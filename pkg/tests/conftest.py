import sys
from pathlib import Path

import pytest
from hypothesis import settings

# oracles.py lives next to the tests
sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_verdicts = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: verdict(number, ok, detail)."""
    def put(number, ok, detail):
        _verdicts[number] = (bool(ok), detail)
    return put


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        ok, detail = _verdicts[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
