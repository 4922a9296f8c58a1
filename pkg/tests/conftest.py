import pytest

from wgvem.mesh import generate_structured

FAMILIES3 = ("square", "perturbed-square", "hexagon-dominant")


@pytest.fixture(scope="session")
def meshes():
    return {kind: generate_structured(kind, 4) for kind in FAMILIES3}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
