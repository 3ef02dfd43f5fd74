import pytest

_acceptance = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store a pass/fail line for the acceptance summary."""
    store = request.config.stash.setdefault(_acceptance, {})

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_acceptance, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        terminalreporter.write_line(store[number])
