import importlib


def pytest_terminal_summary(terminalreporter):
    # one PASS/FAIL line per acceptance criterion that ran
    try:
        acc = importlib.import_module("test_acceptance")
    except ImportError:
        return
    if not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[key])
