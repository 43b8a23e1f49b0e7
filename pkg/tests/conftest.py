import pytest

ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test body calls ``criterion(n, text)``
    before its assertions and the outcome fills in PASS or FAIL."""
    entry = {}

    def record(number, text):
        entry.update(number=number, text=text)

    yield record
    if entry:
        ACCEPTANCE[entry["number"]] = (entry["text"], request.node)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.acceptance_passed = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        text, node = ACCEPTANCE[number]
        status = "PASS" if getattr(node, "acceptance_passed", False) else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {text}")
