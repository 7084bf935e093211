import pytest

# acceptance verdicts, keyed by criterion number
_VERDICTS: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 12


@pytest.fixture
def verdict():
    """Record a criterion outcome, then assert it."""

    def record(number: int, ok: bool, detail: str):
        _VERDICTS[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        ok, detail = _VERDICTS.get(number, (False, "no verdict (not run or errored before its check)"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
