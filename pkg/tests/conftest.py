import pytest
from hypothesis import settings

from affine_decomp import moment_curve, polynomial_curve

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def moment2():
    return moment_curve(2)


@pytest.fixture
def moment3():
    return moment_curve(3)


@pytest.fixture
def cubic():
    """``(t, t^3)`` on [0, 1]: torsion 6t."""
    return polynomial_curve([[0, 1], [0, 0, 0, 1]], (0, 1), N=4, cnorm=6)


@pytest.fixture
def quartic():
    """``(t, t^4/6)`` on [-1, 1]: torsion 2t^2."""
    return polynomial_curve([[0, 1], [0, 0, 0, 0, 1 / 6]], (-1, 1), N=4, cnorm=4)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
