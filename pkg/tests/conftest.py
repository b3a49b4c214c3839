import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    def record(n: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
