import csv
import time
from contextlib import contextmanager

import pytest

# criterion number -> summary line, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def write_csv(tmp_path):
    def _write(rows, name="data.csv"):
        path = tmp_path / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)
        return path

    return _write


@pytest.fixture
def criterion():
    """Context manager recording PASS/FAIL plus details for one criterion."""

    @contextmanager
    def _run(number: int, title: str, limit_s: float):
        notes: list[str] = []
        t0 = time.perf_counter()
        try:
            yield notes
            elapsed = time.perf_counter() - t0
            assert elapsed < limit_s, f"took {elapsed:.1f}s, limit {limit_s:.0f}s"
        except BaseException as exc:
            elapsed = time.perf_counter() - t0
            detail = "; ".join(notes + [str(exc).splitlines()[0] if str(exc) else type(exc).__name__])
            ACCEPTANCE_LINES[number] = f"FAIL  criterion {number}: {title} ({elapsed:.1f}s) {detail}"
            raise
        ACCEPTANCE_LINES[number] = f"PASS  criterion {number}: {title} ({elapsed:.1f}s) {'; '.join(notes)}"

    return _run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
