import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one ``criterion N: PASS|FAIL`` line; it is printed now and in the summary."""

    def emit(number, checks, elapsed, detail=""):
        ok = all(checks.values())
        parts = ", ".join(f"{name} {'ok' if passed else 'FAILED'}" for name, passed in checks.items())
        line = f"ACCEPTANCE criterion {number}: {'PASS' if ok else 'FAIL'} ({parts}; {elapsed:.1f} s)"
        if detail:
            line += f" {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
