import os

import pytest
from hypothesis import HealthCheck, settings

from rdalloc.distortion import SurfaceParams

settings.register_profile("default", max_examples=60, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("stress", max_examples=600, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

REF_PARAMS = SurfaceParams(0.80, (72.45, 183.09), (7.07e-4, 2.11e-2))

# Filled by test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    def log(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
        return passed
    return log


@pytest.fixture
def ref_params():
    return REF_PARAMS


def random_params(rng, n, gamma=(0.0, 10.0)):
    return SurfaceParams(rng.uniform(*gamma), rng.uniform(1.0, 1e3, n), 10 ** rng.uniform(-4, -1, n))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
