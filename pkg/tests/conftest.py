import numpy as np
import pytest

from twrelay.model import SystemConfig, sample_channels

# antenna/stream layout used throughout the evaluation: N_B = N_R = 4,
# three 2-antenna users carrying 2, 1 and 1 streams
PAPER_LAYOUT = dict(n_bs=4, n_rs=4, n_ms=(2, 2, 2), streams=(2, 1, 1))


def crand(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def paper_config():
    return SystemConfig.from_snr(15.0, **PAPER_LAYOUT)


@pytest.fixture
def paper_channels(paper_config):
    return sample_channels(paper_config, 2024)
