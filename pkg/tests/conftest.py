import numpy as np
import pytest
from hypothesis import settings

from xxzdm.model import ModelParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, scale=3.0, gamma0=(0.01, 0.5), gamma=(0.2, 3.0)):
    J, Jz, Dz = rng.uniform(-scale, scale, 3)
    return ModelParams(J, Jz, Dz, rng.uniform(*gamma0), rng.uniform(*gamma))


def random_density(rng, rank=4):
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
