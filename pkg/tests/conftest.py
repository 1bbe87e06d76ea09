import pytest

_VERDICTS = []


def _line(number, ok, detail):
    return f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the summary."""

    def record(number, ok, detail=""):
        line = _line(number, ok, detail)
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
