"""Shared pytest configuration.

Collects the outcome of each ``test_criterion_NN`` function in
``test_acceptance.py`` and prints a one-line PASS/FAIL verdict per
criterion in the terminal summary, so the acceptance status is readable
at a glance even inside a large run.
"""

import re

import pytest

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")
_acceptance_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_RE.match(item.name)
    if match is None:
        return
    num = int(match.group(1))
    if report.when == "call":
        _acceptance_outcomes[num] = (report.outcome, item)
    elif report.when == "setup" and report.outcome != "passed":
        # errored or skipped before the call phase: still report a line
        _acceptance_outcomes[num] = (report.outcome, item)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance_outcomes):
        outcome, item = _acceptance_outcomes[num]
        descriptions = getattr(item.module, "CRITERIA", {})
        desc = descriptions.get(num, item.name)
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status} - {desc}")
