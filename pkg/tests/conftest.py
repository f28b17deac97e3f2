import csv
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")
    config.addinivalue_line("markers", "slow: long-running Monte Carlo check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    n, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    if rep.failed:
        crash = getattr(rep.longrepr, "reprcrash", None)
        first = str(crash.message).splitlines()[0][:200] if crash else ""
        detail = " | ".join(x for x in (detail, first) if x)
    _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        line = f"criterion {n} [{status}] {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a one-line summary to the running criterion."""
    def set_detail(text):
        request.node.criterion_detail = text
    return set_detail


@pytest.fixture(scope="session")
def reference_tables():
    """Published bias/SD/RMSE (x100) keyed by (family, model, tau, estimator, n)."""
    out = {}
    with open(DATA / "reference_tables.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["family"], row["model"], float(row["tau"]), row["estimator"],
                   int(row["n"]))
            out[key] = {k: float(row[k]) for k in ("bias", "sd", "rmse")}
    return out
