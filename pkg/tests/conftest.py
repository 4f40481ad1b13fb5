"""Shared test plumbing.

test_acceptance.py records one PASS/FAIL line per top-level criterion through
the `acceptance` fixture; the hook below prints the collected lines after the
run so the criteria stay visible at a glance even when the suite is green.
"""

from __future__ import annotations

import pytest


class AcceptanceLog:
    """Ordered criterion -> (passed, detail) registry."""

    def __init__(self):
        self.lines = {}

    def check(self, name: str, body):
        """Run one criterion body, record its outcome, re-raise on failure.

        `body` returns an optional detail string shown next to the verdict.
        """
        try:
            detail = body()
        except Exception as e:
            self.lines[name] = (False, f"{type(e).__name__}: {e}")
            raise
        self.lines[name] = (True, detail or "")


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance() -> AcceptanceLog:
    return _LOG


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LOG.lines:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in _LOG.lines.items():
        verdict = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"{verdict}  {name}{suffix}")
