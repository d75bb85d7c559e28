def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines at the end of the run, passing or not."""
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT, key=lambda s: int(s[7:9])):
            terminalreporter.write_line(line)
