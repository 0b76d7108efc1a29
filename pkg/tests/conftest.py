"""Shared fixtures; acceptance verdicts are echoed in the terminal summary."""

import pytest

VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record and print a PASS/FAIL line, then assert on it."""
    def _report(label: str, checks: dict[str, bool], detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"{'PASS' if ok else 'FAIL'}  {label}"
        if detail:
            line += f"  ({detail})"
        if failed:
            line += f"  failed: {', '.join(failed)}"
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return _report
