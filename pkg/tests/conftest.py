SUMMARY = []


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    SUMMARY.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not SUMMARY:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(SUMMARY):
        terminalreporter.write_line(line)
