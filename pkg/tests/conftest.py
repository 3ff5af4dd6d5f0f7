import math

import numpy as np
import pytest

from paracoupler.device import default_device

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def device():
    return default_device()


@pytest.fixture(scope="session")
def device_phic(device):
    return device.at_bias(device.cancellation_flux())


@pytest.fixture(scope="session")
def device_386(device):
    return device.at_bias(0.386)


@pytest.fixture(scope="session")
def pswap_gate(device_phic):
    from paracoupler.gates import compile_pswap_cz
    from paracoupler.pulses import Envelope

    env = Envelope.hann_edges(rise=10e-9, plateau=20e-9, fall=10e-9)
    return compile_pswap_cz(device_phic, 40e-9, env)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
