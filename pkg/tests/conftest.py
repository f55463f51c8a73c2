import os

# keep sweep workers predictable in CI
os.environ.setdefault("CHTX_THREADS", "2")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[num])
