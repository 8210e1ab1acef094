"""Pytest configuration: acceptance-criterion reporting.

Each acceptance test records a single PASS/FAIL line through the
``criterion`` fixture; the lines are printed together in a dedicated
section at the end of the run so the verdict for every criterion is
visible regardless of output capturing.
"""

from __future__ import annotations

import pytest

_CRITERION_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Recorder: criterion(num, description, passed, elapsed, cap)."""

    def _record(num: int, description: str, passed: bool,
                elapsed: float | None = None, cap: float | None = None):
        verdict = "PASS" if passed else "FAIL"
        timing = ""
        if elapsed is not None:
            timing = f" [{elapsed:.2f}s"
            timing += f" / cap {cap:.0f}s]" if cap is not None else "]"
        _CRITERION_LINES[num] = f"[criterion {num:02d}] {verdict} - {description}{timing}"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[num])
