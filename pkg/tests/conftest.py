ACCEPTANCE_RESULTS: list[str] = []


def record_acceptance(criterion: int, passed: bool, detail: str):
    ACCEPTANCE_RESULTS.append(
        f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
