"""Collects acceptance verdicts so they appear in the terminal summary."""

import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line; returns the boolean for asserting."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
