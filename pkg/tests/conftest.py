import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def record():
    """Store the one-line verdict of an acceptance criterion for the run summary."""

    def _record(n: int, passed: bool, text: str, xfail: bool = False) -> str:
        tag = "PASS" if passed else ("FAIL (xfail)" if xfail else "FAIL")
        line = f"{tag} criterion {n}: {text}"
        _LINES[n] = line
        print(line)
        return line

    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
