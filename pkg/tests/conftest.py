import numpy as np
import pytest

from phaseshape import ChannelParams, psk, qam


@pytest.fixture(scope="session")
def qam16():
    return qam(16)


@pytest.fixture(scope="session")
def psk16():
    return psk(16)


def params_at(eb_n0_db: float, sigma_p2: float, m: int = 16, p: float = 1.0) -> ChannelParams:
    return ChannelParams.from_eb_n0(eb_n0_db, m, sigma_p2, p)


@pytest.fixture(scope="session")
def rng_cases():
    """Shared pool of random (r, x) pairs for property sweeps."""
    rng = np.random.default_rng(20240817)
    r = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
    x = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
    return r, x
