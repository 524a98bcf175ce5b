import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mrhqbh.mrh import build_index  # noqa: E402
from mrhqbh.signal import synth_corpus  # noqa: E402

SUITE_BUDGET_S = 120.0
_results: dict[int, tuple[str, str, float]] = {}
_start = [0.0]


@pytest.fixture(scope="session")
def small_corpus():
    return synth_corpus(2024, 20, 2048, 8000)


@pytest.fixture(scope="session")
def small_index(small_corpus):
    return build_index(small_corpus, 64, 3)


def pytest_sessionstart(session):
    _start[0] = time.perf_counter()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    number, title = marker.args
    if rep.when == "call" or rep.outcome != "passed":
        _results[number] = (title, "PASS" if rep.outcome == "passed" else "FAIL", rep.duration)


def _full_run(session) -> bool:
    files = {Path(str(item.fspath)).name for item in session.items}
    return len(files) > 1 and "test_acceptance.py" in files


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _start[0]
    if _full_run(session):
        ok = elapsed < SUITE_BUDGET_S
        _results[10] = (f"full suite under {SUITE_BUDGET_S:.0f} s ({elapsed:.1f} s)", "PASS" if ok else "FAIL", elapsed)
        if not ok:
            session.exitstatus = pytest.ExitCode.TESTS_FAILED


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, verdict, secs = _results[number]
        terminalreporter.write_line(f"C{number:<2} {verdict}  {title}  [{secs:.2f} s]")
