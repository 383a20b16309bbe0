import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from esdg import _kernels

settings.register_profile(
    "esdg",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("esdg")

BACKENDS = ["python"] + (["cython"] if _kernels.HAVE_COMPILED else [])


@pytest.fixture(autouse=True)
def _quiet_flux_warnings():
    # the standard flux parameters sit below the sufficient beta0 bound
    logging.getLogger("esdg.dg_operator").setLevel(logging.ERROR)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
