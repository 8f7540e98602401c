import pytest

_RESULTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record ``(number, ok, detail)`` for the end-of-run acceptance summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _RESULTS.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
