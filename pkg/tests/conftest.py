import pytest

# criterion number -> list of (label, passed, detail); filled by test_acceptance
CRITERIA: dict = {}


def record(number: int, label: str, passed: bool, detail: str = ""):
    CRITERIA.setdefault(number, []).append((label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        parts = CRITERIA[n]
        ok = all(p for _, p, _ in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for label, p, detail in parts:
            terminalreporter.write_line(f"    [{'ok' if p else 'FAIL'}] {label}: {detail}")
