"""Shared fixtures for the suite; heavy lifting lives in helpers.py."""

from __future__ import annotations

import sys

import pytest

from helpers import make_gateway


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdict lines after the run, outside capture."""
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance gate")
        for line in verdicts:
            terminalreporter.write_line(line)


@pytest.fixture
def demo_gateway():
    """Deterministic in-process gateway with the demo deployment registered."""
    gateway, _ = make_gateway()
    return gateway


@pytest.fixture
def gateway_and_sink():
    return make_gateway()
