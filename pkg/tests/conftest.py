import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"[{outcome}] {name}")
