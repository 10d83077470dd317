import warnings

import pytest
from hypothesis import HealthCheck, settings

from optinject.decorrelate import decorrelate
from optinject.demo import make_instance
from optinject.estimator import fit_full_rank, fit_rank_constrained

settings.register_profile(
    "repo", max_examples=60, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

BATTERY_SEEDS = range(50)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    ok = rep.passed if rep.when == "call" else not rep.failed
    _, prev_ok, details = _criteria.get(n, (title, True, []))
    details = details + [v for k, v in rep.user_properties if k == "detail"]
    _criteria[n] = (title, prev_ok and ok and not rep.skipped, details)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok, details = _criteria[n]
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += "  [" + "; ".join(dict.fromkeys(details)) + "]"
        terminalreporter.write_line(line)


class Fitted:
    def __init__(self, inst):
        self.inst = inst
        self.x, self.y, self.ranks = inst.x, inst.y, inst.ranks
        self.sys = decorrelate(inst.v)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.est = fit_rank_constrained(self.x, self.sys, self.ranks)
        self.full = fit_full_rank(self.x, self.sys)


@pytest.fixture(scope="session")
def battery():
    """Fifty seeded desk-scale instances (m, n <= 8, p <= 3, N >= 4 sum q)."""
    return [Fitted(make_instance(s)) for s in BATTERY_SEEDS]
