import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance_record():
    """Record the verdict of one acceptance criterion for the summary."""

    def record(criterion, passed, detail):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")
