import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collects one status line per acceptance criterion for the terminal summary."""

    def _report(label, check):
        line = f"[{label}] {check.line()}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return check

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
