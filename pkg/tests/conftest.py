"""Shared fixtures; collects the acceptance verdicts printed after the run."""
import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


class Recorder:
    """Store one verdict line per acceptance criterion (or sub-criterion)."""

    def __call__(self, criterion: str, passed: bool, detail: str) -> bool:
        _VERDICTS.append((criterion, bool(passed), detail))
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        print(line)
        return bool(passed)


@pytest.fixture(scope="session")
def verdict():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _VERDICTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
