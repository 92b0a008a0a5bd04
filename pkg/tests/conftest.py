import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=150,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_acceptance_lines = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_acceptance_lines] = []


@pytest.fixture
def report(request):
    """Record a 'PASS/FAIL criterion N: detail' line and assert on it."""
    lines = request.config.stash[_acceptance_lines]

    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_lines, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
