import sys

import numpy as np
import pytest

from sparsestab.netmodel import LinearModel, bundled_case, linearize, solve_equilibrium


def scalar_model(a=-1.0, b=1.0, c=1.0) -> LinearModel:
    return LinearModel(A0=[[a]], B0=[[b]], C0=[[c]], state_labels=["z"],
                       injection_labels=["u"], measurement_labels=["z"])


@pytest.fixture(scope="session")
def smib_case():
    return bundled_case("smib")


@pytest.fixture(scope="session")
def smib(smib_case):
    return linearize(smib_case, solve_equilibrium(smib_case), "full")


@pytest.fixture(scope="session")
def case9():
    return bundled_case("case9")


@pytest.fixture(scope="session")
def case9_full(case9):
    return linearize(case9, solve_equilibrium(case9), "full")


@pytest.fixture(scope="session")
def case9_gen(case9):
    return linearize(case9, solve_equilibrium(case9), "generators")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
