from helpers import ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c.split()[0])):
        status, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {status}  {detail}")
