import pytest

_gate_lines = []


@pytest.fixture
def gate_report():
    """Collect one figure-of-merit line per acceptance gate; the lines are
    echoed after the run so they survive output capture."""
    def report(line: str) -> None:
        _gate_lines.append(f"PASS  {line}")
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _gate_lines:
        terminalreporter.section("acceptance gates")
        for line in _gate_lines:
            terminalreporter.write_line(line)
