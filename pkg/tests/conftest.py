import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from excite_id.signal_core import Datum

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_stream(rng, p, k, n_rows=1, noise=0.1):
    theta = rng.normal(size=p)
    data = []
    for i in range(k):
        phi = rng.normal(size=(n_rows, p))
        psi = phi @ theta + noise * rng.normal(size=n_rows)
        data.append(Datum(i, 0.1 * i, phi, psi))
    return theta, data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one pass/fail line per acceptance criterion, shown in the terminal summary
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call" or not item.name.startswith("test_criterion_"):
        return
    number = int(item.name.split("_")[2])
    title = " ".join(item.name.split("_")[3:])
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _criteria[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
