import sys
from pathlib import Path

import pytest

from ocmdp.generators import paper_examples

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = []


@pytest.fixture(scope="session")
def catalog():
    return paper_examples()


@pytest.fixture
def record():
    """Record one acceptance line; printed again in the terminal summary."""

    def _record(number, name, ok, detail=""):
        line = f"acceptance {number} {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        _RESULTS.append((number, line))
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
