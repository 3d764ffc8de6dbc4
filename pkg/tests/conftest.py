import time

ACCEPTANCE = {}  # criterion number -> (passed, detail)
_START = time.perf_counter()
WALL_LIMIT = 300.0


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    wall = time.perf_counter() - _START
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        if k == 9:
            ok = ok and wall < WALL_LIMIT
            detail = f"{detail}; suite wall time {wall:.0f} s < {WALL_LIMIT:.0f} s"
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
