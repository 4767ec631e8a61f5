import re

import pytest

_LINES = []


@pytest.fixture
def report(capsys):
    """Record one PASS/FAIL line for the acceptance summary and print it."""

    def emit(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        _LINES.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    def order(item):
        number, suffix = re.match(r"(\d+)(.*)", str(item[0])).groups()
        return int(number), suffix

    for _, line in sorted(_LINES, key=order):
        terminalreporter.write_line(line)
