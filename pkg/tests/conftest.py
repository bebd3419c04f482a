import pytest

_RESULTS = {}


class AcceptanceReport:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, number, title, passed, detail=""):
        _RESULTS[number] = (title, bool(passed), detail)
        line = f"AC{number:<2} {'PASS' if passed else 'FAIL'}  {title}"
        print(line + (f"  [{detail}]" if detail else ""))
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceReport()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, detail = _RESULTS[number]
        line = f"AC{number:<2} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
    failed = sum(not v[1] for v in _RESULTS.values())
    terminalreporter.write_line(f"{len(_RESULTS) - failed}/{len(_RESULTS)} criteria pass")
