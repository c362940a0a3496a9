import pytest

from slowlight.model import EXCITED, GROUND, LevelScheme

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def two_level():
    return LevelScheme(("g", "e"), (GROUND, EXCITED), {("g", "e")})


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
