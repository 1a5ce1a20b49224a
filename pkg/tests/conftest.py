import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metadist.bench.variants import build_variant, example_domain

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def mlp():
    return example_domain("mlp")


@pytest.fixture(scope="session")
def dropout():
    return example_domain("dropout")


@pytest.fixture(scope="session", params=[1, 2, 3, 4, 5], ids=lambda v: f"v{v}")
def variant(request):
    return request.param, build_variant(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
