import pytest

_REPORT_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = []


@pytest.fixture
def acceptance_report(request):
    """Append ``(criterion, passed, detail)``; printed after the run."""
    return request.config.stash[_REPORT_KEY]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(lines, key=lambda row: str(row[0])):
        terminalreporter.line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
