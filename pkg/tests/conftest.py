import sys
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shelterscan.ingest import collapse_to_stays  # noqa: E402
from shelterscan.synth import generate_population  # noqa: E402
from shelterscan.timeline import ClientTimeline  # noqa: E402

APRIL = [date(2019, 4, d) for d in (10, 12, 13, 20, 22, 30)]


@pytest.fixture
def april_client() -> ClientTimeline:
    return ClientTimeline("april", tuple(APRIL))


@pytest.fixture(scope="session")
def synthetic_population():
    events, clients = generate_population(2000, seed=0)
    return events, clients, collapse_to_stays(events)


_acceptance: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        doc = getattr(report, "ac_doc", "")
        _acceptance.append((name, report.outcome.upper(), doc))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    doc = (item.function.__doc__ or "").strip().splitlines()
    rep.ac_doc = doc[0] if doc else ""


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, doc in _acceptance:
        terminalreporter.write_line(f"{outcome:<7} {name}  {doc}")
