"""Collects acceptance verdicts and prints one line per criterion at the end."""

import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str = ""):
        VERDICTS[number] = (ok, detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
