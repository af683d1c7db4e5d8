import re


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if getattr(rep, "when", "call") != "call" and status == "passed":
                continue
            m = re.search(r"test_criterion_(\d+)[^:]*", rep.nodeid)
            if m:
                num = int(m.group(1))
                name = rep.nodeid.split("::")[-1]
                verdict = "PASS" if status == "passed" else "FAIL"
                key = (num, name)
                if rows.get(key) != "FAIL":
                    rows[key] = verdict
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for (num, name) in sorted(rows):
            terminalreporter.write_line(f"criterion {num:2d} [{rows[(num, name)]}] {name}")
