import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one acceptance line; the summary is printed at the end of the run."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number, title, ok, detail=""):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
