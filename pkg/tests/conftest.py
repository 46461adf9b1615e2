"""Suite-wide pytest hooks.

Acceptance tests carry a criterion marker. Their verdict lines are printed
from the terminal summary, after capture teardown, because pytest's default
fd-level capture swallows anything a test writes, even via sys.__stdout__.
"""
import pytest

verdicts = {}  # criterion -> (passed, seconds), insertion-ordered
notes = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): release acceptance criterion")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        name = marker.args[0]
        if rep.when == "call":
            verdicts[name] = (rep.passed, rep.duration)
        elif not rep.passed:
            # setup or teardown crashed, the body never reached a verdict
            verdicts.setdefault(name, (False, rep.duration))
    return rep


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, seconds) in verdicts.items():
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{tag}] {name} ({seconds:.1f}s)")
    for line in notes:
        terminalreporter.write_line(line)
