RESULTS = {}


def record(key, ok, detail=""):
    RESULTS[key] = (bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = RESULTS[key]
        terminalreporter.write_line("criterion %s: %s  %s" % (key, "PASS" if ok else "FAIL", detail))
