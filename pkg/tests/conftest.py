import math

import pytest

from shieldnn.barrier import BarrierParams, LieContext, reference_context
from shieldnn.kbm import VehicleParams
from shieldnn.synthesis import synthesize
from shieldnn.verifier import verify


@pytest.fixture(scope="session")
def ctx():
    return reference_context()


@pytest.fixture(scope="session")
def cert(ctx):
    return verify(ctx)


@pytest.fixture(scope="session")
def filt(cert):
    return synthesize(cert)


def make_ctx(sigma=0.48, r_bar=4.0, l=2.0, delta=math.pi / 4, v_max=20.0, K=None):
    return LieContext(VehicleParams(l, l, delta, v_max), BarrierParams(r_bar, sigma, K))
