import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from funmig.io import fixtures  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def fx():
    return fixtures()


@pytest.fixture(scope="session")
def rxn(fx):
    return fx["rxnnet"].program()


@pytest.fixture(scope="session")
def overlap(fx):
    return fx["overlap"].program()


@pytest.fixture(scope="session")
def a_data(fx, rxn):
    return fx["rxnnet"].load("a_data", rxn.schemas["A"])


@pytest.fixture(scope="session")
def oqmd_data(fx, overlap):
    return fx["oqmd_mini"].load("oqmd_data", overlap.schemas["OQMD"])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
