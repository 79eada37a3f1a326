import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")
_outcomes: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    number, name = int(m.group(1)), m.group(2).replace("_", " ")
    if report.failed:
        _outcomes[number] = (name, "FAIL")
    elif report.when == "call" and number not in _outcomes:
        _outcomes[number] = (name, "PASS" if report.passed else "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        name, status = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:2d} {name}: {status}")
