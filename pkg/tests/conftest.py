import time

import numpy as np
import pytest

from eqfuller.fuller_index import fuller_index
from eqfuller.regions import EssentialWindow, Region
from eqfuller.systems import builtin_system, hopf

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _ACCEPTANCE.get(number, (title, "passed"))[1]
        status = rep.outcome if prev == "passed" else prev
        _ACCEPTANCE[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        tag = "PASS" if status == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {number:2d}. {title}")


class Timed:
    def __init__(self, value, seconds):
        self.value = value
        self.seconds = seconds


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return Timed(out, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def window48():
    return EssentialWindow(Region.ball(3.0), 4.0, 8.0)


@pytest.fixture(scope="session")
def hopf_run(window48):
    return timed(fuller_index, hopf(), None, window48)


@pytest.fixture(scope="session")
def hopf_z2_run(window48):
    return timed(fuller_index, builtin_system("hopf_z2"), None, window48)


@pytest.fixture(scope="session")
def axis_z2_run(window48):
    return timed(fuller_index, builtin_system("axis_z2"), None, window48)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240607)
