import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from degensl.potential import builtin

settings.register_profile(
    "degensl",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("degensl")


@pytest.fixture(scope="session")
def q_linear():
    return builtin("linear")


@pytest.fixture(scope="session")
def q_linear_small():
    return builtin("linear", 513)


@pytest.fixture(scope="session")
def q_zero():
    return builtin("zero")


@pytest.fixture(scope="session")
def q_cos2x():
    return builtin("cos2x")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""

    def record(label, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip()
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
