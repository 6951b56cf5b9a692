import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from transbeam.assembly import assemble
from transbeam.discretization import build_space
from transbeam.model import BeamParameters

settings.register_profile("transbeam", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("transbeam")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the summary."""
    def log(number, passed, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return BeamParameters()


@pytest.fixture(scope="session")
def small_space(params):
    return build_space(params, 4, 4)


@pytest.fixture(scope="session")
def small_ops(small_space, params):
    return assemble(small_space, params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
