import numpy as np
import pytest

from astbayes.ast_core import ASTParams, ast_sample
from astbayes.nu_prior import default_prior_table
from astbayes.priors import JointPriorSpec


@pytest.fixture(scope="session")
def prior_table():
    return default_prior_table()


@pytest.fixture(scope="session")
def prior_spec(prior_table):
    return JointPriorSpec(prior_table)


@pytest.fixture(scope="session")
def recovery_sample():
    """n=200 draw from the single-sample recovery setting."""
    return ast_sample(ASTParams(0.35, 6, 2.0, 1.5), 200, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


CRITERIA: dict = {}


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(number, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"criterion {number}: {status} ({detail})"
        CRITERIA[number] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
