import pytest

_REPORT_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; returns ``passed`` so tests can assert on it."""
    lines = request.config.stash[_REPORT_KEY]

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        lines.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: "
                              f"{title} | {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(line)
