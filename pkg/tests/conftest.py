import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion: ``criterion(n, ok, detail)``; the test still asserts."""

    def record(n, ok, detail):
        _RESULTS[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"C{n:<2} {'PASS' if ok else 'FAIL'}  {detail}")
