import pytest

from obspart import builtin_frw, builtin_wigner


@pytest.fixture(scope="session")
def frw():
    return builtin_frw()


@pytest.fixture(scope="session")
def wigner():
    return builtin_wigner()


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
