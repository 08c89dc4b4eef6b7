import pytest

from slowfast.kinetics import ModelParams


@pytest.fixture
def fig1_params():
    """alpha=0.5, beta=0.2, gamma=3, delta=0.3, eps=1."""
    return ModelParams(alpha=0.5, beta=0.2, gamma=3.0, delta=0.3, epsilon=1.0)


@pytest.fixture
def ref_params():
    """The beta=0.22 reference set used for canards and patterns."""
    return ModelParams(alpha=0.5, beta=0.22, gamma=3.0, delta=0.3, epsilon=1.0, d=1.0)


_ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _ACCEPTANCE_LINES.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
