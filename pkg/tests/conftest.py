import sys
import time
from contextlib import contextmanager

import pytest

# criterion number -> (passed, label, seconds, detail)
_VERDICTS: dict[int, tuple] = {}


@pytest.fixture
def criterion():
    """Context manager recording a pass/fail verdict for one acceptance criterion."""

    @contextmanager
    def _run(number: int, label: str, limit_s: float):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            dt = time.perf_counter() - t0
            _VERDICTS[number] = (False, label, dt, f"{type(exc).__name__}: {exc}".splitlines()[0])
            _emit(number)
            raise
        dt = time.perf_counter() - t0
        ok = dt < limit_s
        _VERDICTS[number] = (ok, label, dt, "" if ok else f"runtime {dt:.2f}s over {limit_s}s limit")
        _emit(number)
        assert ok, f"criterion {number} took {dt:.2f}s (limit {limit_s}s)"

    return _run


def _line(number: int) -> str:
    ok, label, dt, detail = _VERDICTS[number]
    text = f"{'PASS' if ok else 'FAIL'} criterion {number}: {label} ({dt:.2f}s)"
    return f"{text} -- {detail}" if detail else text


def _emit(number: int):
    print(_line(number), file=sys.stdout)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_line(number))
