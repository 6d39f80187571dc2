import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

FS = 44100.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One verdict line per acceptance criterion, printed after the run.
_verdicts = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or (rep.failed and rep.when == "setup")):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _verdicts.append((mark.args[0], "PASS" if rep.passed else "FAIL", item.name, detail))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, name, detail in sorted(_verdicts, key=lambda v: int(v[0][2:])):
        terminalreporter.write_line(f"{label:<5} {verdict}  {name}  {detail}")
