import numpy as np
import pytest
from hypothesis import settings

from enkbf_dp._backend import available

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BACKENDS = sorted(available())


@pytest.fixture(params=BACKENDS)
def backend(request):
    return available()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number} {name}: {detail}")
