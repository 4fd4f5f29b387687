import numpy as np
import pytest

from sovrisk.panel import preprocess
from sovrisk.synth import DGPSpec, generate


@pytest.fixture(scope="session")
def small_raw():
    panel, truth = generate(DGPSpec(n_countries=6, n_days=400, start="2020-01-01", seed=3))
    return panel, truth


@pytest.fixture(scope="session")
def small_panel(small_raw):
    panel, _ = preprocess(small_raw[0])
    return panel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, text): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, text = mark.args
    if rep.when == "call" or rep.failed:
        _VERDICTS[n] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        status, text = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {text}")
