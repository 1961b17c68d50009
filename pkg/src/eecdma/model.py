"""Core uplink model: covariance, SINR, MSE, MMSE receivers, utility.

All quantities live in linear units (Watts, linear SINR); decibel
conversions happen only at I/O boundaries.  The thermal noise enters every
formula as half the configured one-sided PSD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erfc


@dataclass(frozen=True)
class SystemConfig:
    """Global constants of the uplink.

    N          processing gain (chips per symbol)
    K          number of active users
    noise_psd  one-sided thermal noise PSD, W/Hz (formulas use noise_psd/2)
    M          packet length in symbols
    L          information symbols per packet, L <= M
    R          common symbol rate, symbols/s
    p_max      per-user transmit power cap, W
    """

    N: int
    K: int
    noise_psd: float
    M: int
    L: int
    R: float
    p_max: float

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive integers")
        if self.M < 1 or not (1 <= self.L <= self.M):
            raise ValueError("need 1 <= L <= M")
        if self.noise_psd <= 0 or self.R <= 0 or self.p_max <= 0:
            raise ValueError("noise_psd, R and p_max must be strictly positive")

    @property
    def noise_half(self) -> float:
        return 0.5 * self.noise_psd


@dataclass
class NetworkState:
    """Full game state: powers, channel gains, codes and receivers.

    powers     (K,) transmit powers, W
    gains      (K,) channel amplitude gains
    codes      (N, K) spreading codes, unit-norm columns
    receivers  (N, K) linear receive filters
    """

    powers: np.ndarray
    gains: np.ndarray
    codes: np.ndarray
    receivers: np.ndarray

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=float)
        self.gains = np.asarray(self.gains, dtype=float)
        self.codes = np.asarray(self.codes, dtype=float)
        self.receivers = np.asarray(self.receivers, dtype=float)

    @property
    def num_users(self) -> int:
        return self.codes.shape[1]

    def copy(self) -> "NetworkState":
        return NetworkState(self.powers.copy(), self.gains.copy(),
                            self.codes.copy(), self.receivers.copy())

    def validate(self, cfg: SystemConfig, ortho_tol: float = 1e-9) -> None:
        K = self.num_users
        if not (len(self.powers) == len(self.gains) == self.receivers.shape[1] == K):
            raise ValueError("inconsistent per-user array lengths")
        norms = np.linalg.norm(self.codes, axis=0)
        if K and np.abs(norms - 1.0).max() > ortho_tol:
            raise ValueError("spreading codes must have unit norm")
        if K and (self.powers.min() < 0 or self.powers.max() > cfg.p_max * (1 + 1e-12)):
            raise ValueError("powers must lie in [0, p_max]")
        if K and self.gains.min() <= 0:
            raise ValueError("channel gains must be strictly positive")


@dataclass
class GameOutcome:
    """Equilibrium summary returned by the game runners."""

    state: object
    sinrs: np.ndarray
    utilities: np.ndarray
    iterations_used: int
    converged: bool


def received_powers(state: NetworkState) -> np.ndarray:
    """Per-user received powers p_k h_k^2."""
    return state.powers * state.gains ** 2


def covariance(state: NetworkState, cfg: SystemConfig) -> np.ndarray:
    """Covariance of the received chip vector.

    Sum of rank-one code outer products weighted by the received powers,
    plus the white-noise floor.  Always symmetric positive definite.
    """
    N = state.codes.shape[0]
    M = (state.codes * received_powers(state)) @ state.codes.T
    M[np.diag_indices(N)] += cfg.noise_half
    return 0.5 * (M + M.T)


def sinr(state: NetworkState, cfg: SystemConfig, k: int) -> float:
    """Output SINR of user k's linear receiver.

    Desired power through the filter over noise plus inter-user leakage.
    Raises for an identically zero receiver.
    """
    d = state.receivers[:, k]
    dnorm2 = float(d @ d)
    if dnorm2 == 0.0:
        raise ValueError("zero receiver")
    rx = received_powers(state)
    cross = d @ state.codes
    num = rx[k] * cross[k] ** 2
    interference = float(np.sum(rx * cross ** 2)) - rx[k] * cross[k] ** 2
    return num / (cfg.noise_half * dnorm2 + interference)


def sinr_all(state: NetworkState, cfg: SystemConfig) -> np.ndarray:
    """Vectorized SINR for every user (same math as :func:`sinr`)."""
    dnorm2 = np.einsum("ij,ij->j", state.receivers, state.receivers)
    if np.any(dnorm2 == 0.0):
        raise ValueError("zero receiver")
    rx = received_powers(state)
    G2 = (state.receivers.T @ state.codes) ** 2
    own = np.diag(G2) * rx
    interference = G2 @ rx - own
    return own / (cfg.noise_half * dnorm2 + interference)


def mse(state: NetworkState, cfg: SystemConfig, k: int) -> float:
    """Mean square error of user k's linear estimate of its symbol."""
    d = state.receivers[:, k]
    M = covariance(state, cfg)
    cross = np.sqrt(state.powers[k]) * state.gains[k] * float(d @ state.codes[:, k])
    return 1.0 + float(d @ M @ d) - 2.0 * cross


def mmse_receiver(state: NetworkState, cfg: SystemConfig, k: int) -> np.ndarray:
    """MSE-minimizing (and SINR-maximizing) linear receiver for user k.

    Solves the covariance system through a Cholesky factorization; the
    returned vector carries the sqrt(p_k) h_k scaling of the estimator.
    """
    if state.powers[k] <= 0.0:
        raise ValueError("inactive user has no receiver")
    M = covariance(state, cfg)
    c = cho_factor(M)
    return np.sqrt(state.powers[k]) * state.gains[k] * cho_solve(c, state.codes[:, k])


def mmse_receiver_bank(state: NetworkState, cfg: SystemConfig) -> np.ndarray:
    """MMSE receivers for all users at once (single factorization)."""
    if np.any(state.powers <= 0.0):
        raise ValueError("inactive user has no receiver")
    M = covariance(state, cfg)
    c = cho_factor(M)
    return cho_solve(c, state.codes) * (np.sqrt(state.powers) * state.gains)


def sinr_mmse(state: NetworkState, cfg: SystemConfig, k: int) -> float:
    """Best achievable SINR for user k over all linear receivers.

    Evaluates the quadratic form of the own code against the interference
    covariance (total covariance with user k's own rank-one term removed).
    """
    rx = received_powers(state)
    if state.powers[k] <= 0.0:
        raise ValueError("inactive user has no receiver")
    s = state.codes[:, k]
    M = covariance(state, cfg)
    M_int = M - rx[k] * np.outer(s, s)
    c = cho_factor(0.5 * (M_int + M_int.T))
    return rx[k] * float(s @ cho_solve(c, s))


def packet_success(gamma: float, M: int) -> float:
    """Probability that an M-symbol packet of BPSK symbols is error free."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    q = 0.5 * erfc(np.sqrt(gamma))  # Gaussian tail at sqrt(2*gamma)
    return float((1.0 - q) ** M)


def efficiency(gamma, M: int):
    """Smooth throughput surrogate (1 - exp(-gamma))^M.

    Vanishes faster than linearly at zero, which keeps throughput/power
    utilities finite as the transmit power goes to zero.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be nonnegative")
    out = (-np.expm1(-g)) ** M
    return float(out) if np.isscalar(gamma) else out


def efficiency_derivative(gamma, M: int):
    """First derivative of :func:`efficiency` with respect to SINR."""
    g = np.asarray(gamma, dtype=float)
    base = -np.expm1(-g)
    out = M * base ** (M - 1) * np.exp(-g)
    return float(out) if np.isscalar(gamma) else out


def utility(p: float, gamma: float, cfg: SystemConfig) -> float:
    """Throughput per Watt, bit/Joule."""
    if p <= 0.0:
        raise ValueError("utility undefined at zero power")
    return cfg.R * (cfg.L / cfg.M) * efficiency(gamma, cfg.M) / p


def utility_all(powers: np.ndarray, gammas: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    if np.any(powers <= 0.0):
        raise ValueError("utility undefined at zero power")
    return cfg.R * (cfg.L / cfg.M) * efficiency(gammas, cfg.M) / powers
