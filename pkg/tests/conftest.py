import numpy as np
import pytest

from eecdma.model import NetworkState, SystemConfig


def make_cfg(K=4, N=8, noise_psd=0.4, M=120, L=120, R=1e5, p_max=4.0):
    return SystemConfig(N=N, K=K, noise_psd=noise_psd, M=M, L=L, R=R,
                        p_max=p_max)


def uplink_cfg(K, N=16):
    """Reference uplink numbers: 1e-9 W/Hz noise, -25 dBW cap."""
    return SystemConfig(N=N, K=K, noise_psd=1e-9, M=120, L=120, R=1e5,
                        p_max=10 ** -2.5)


def random_state(cfg, rng, mmse=False):
    """Random feasible state with unit-norm Gaussian codes."""
    codes = rng.normal(size=(cfg.N, cfg.K))
    codes /= np.linalg.norm(codes, axis=0)
    powers = rng.uniform(0.2, 1.0, cfg.K) * cfg.p_max
    gains = rng.uniform(0.5, 2.0, cfg.K)
    state = NetworkState(powers, gains, codes, codes.copy())
    if mmse:
        from eecdma.model import mmse_receiver_bank
        state.receivers = mmse_receiver_bank(state, cfg)
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
