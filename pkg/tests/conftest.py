import pytest

from chansynth.dmc import bec, bsc, identity

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def bsc011():
    return bsc("0.11")


@pytest.fixture
def bec05():
    return bec("0.5")


def reference_channels():
    return {"bsc011": bsc("0.11"), "bsc03": bsc("0.3"), "bsc05": bsc("0.5"),
            "bec05": bec("0.5"), "identity2": identity(2)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
