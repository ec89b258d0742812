import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the running acceptance criterion."""
    state = {}

    def record(label, ok, detail):
        state.update(label=label, ok=bool(ok), detail=detail)
        return ok

    yield record
    if state:
        line = f"{state['label']}: {'PASS' if state['ok'] else 'FAIL'}  {state['detail']}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
