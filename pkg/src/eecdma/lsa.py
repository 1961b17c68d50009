"""Large-system analysis: distributed power control and network profiles.

In a large random-code CDMA system with MMSE receivers, every user's SINR
concentrates around the solution of a scalar fixed-point equation that
involves only the load, the noise level, the user's own received power and
the distribution of the interferers' received powers.  Combined with the
quantile representation of the sorted gain population, this yields a power
control rule that needs nothing but the user's own channel gain, and
closed-form predictions for the power, SINR and utility profiles across
the sorted population, with and without spreading-code optimization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import SystemConfig, efficiency
from .solvers import bisect_root, expand_upper


class InfeasibleLoadError(ValueError):
    """The load is too high for every user to reach the target SINR."""


@dataclass
class LsaInputs:
    """Inputs to the large-system predictions.

    alpha          load K/N
    noise_half_psd half the one-sided noise PSD
    gamma_target   common target SINR
    p_max          per-user transmit power cap, W
    K              population size used for quantile lookups
    inv_cdf        squared-gain quantile function on [0, 1)
    packet_len     packet length (efficiency-function exponent)
    rate           common symbol rate, symbols/s
    info_frac      fraction of information symbols per packet
    """

    alpha: float
    noise_half_psd: float
    gamma_target: float
    p_max: float
    K: int
    inv_cdf: Callable[[float], float]
    packet_len: int = 120
    rate: float = 1e5
    info_frac: float = 1.0

    @classmethod
    def from_config(cls, cfg: SystemConfig, inv_cdf, gamma_target: float,
                    K: int | None = None) -> "LsaInputs":
        K = cfg.K if K is None else K
        return cls(alpha=K / cfg.N, noise_half_psd=cfg.noise_half,
                   gamma_target=gamma_target, p_max=cfg.p_max, K=K,
                   inv_cdf=inv_cdf, packet_len=cfg.M, rate=cfg.R,
                   info_frac=cfg.L / cfg.M)

    def quantiles(self) -> np.ndarray:
        """Sorted-population squared-gain proxies, strongest first."""
        return np.array([self.inv_cdf((self.K - i) / self.K)
                         for i in range(1, self.K + 1)])

    def _utilities(self, sinrs: np.ndarray, powers: np.ndarray) -> np.ndarray:
        return (self.rate * self.info_frac
                * efficiency(sinrs, self.packet_len) / powers)


@dataclass
class LsaPrediction:
    """Predicted per-rank profile across the sorted user population."""

    powers: np.ndarray
    sinrs: np.ndarray
    utilities: np.ndarray
    u2: int                # ranks transmitting at the cap
    receive_power: float   # common received power of the at-target users


def _interference_factor(alpha: float, gamma: float) -> float:
    """1 - alpha * gamma / (1 + gamma); positive iff the load is feasible."""
    return 1.0 - alpha * gamma / (1.0 + gamma)


def asymptotic_sinr(p_received: float, inputs: LsaInputs,
                    interferer_powers: np.ndarray) -> float:
    """Large-system SINR of an MMSE user received at ``p_received``.

    Solves the scalar fixed point g = P / (noise + alpha * E[...]) with the
    expectation over the supplied sample of interferer received powers.
    """
    if p_received <= 0:
        raise ValueError("received power must be positive")
    sample = np.asarray(interferer_powers, dtype=float)
    sigma = inputs.noise_half_psd

    def residual(g: float) -> float:
        if sample.size:
            mean = float(np.mean(sample * p_received / (p_received + sample * g)))
        else:
            mean = 0.0
        return g * (sigma + inputs.alpha * mean) - p_received

    upper = p_received / sigma
    if residual(upper) < 0.0:
        raise InfeasibleLoadError("load infeasible")
    return bisect_root(residual, 1e-12 * upper, upper, rtol=1e-13)


def _equal_power_received(inputs: LsaInputs) -> float:
    """Common received power when every user is at target (no caps)."""
    factor = _interference_factor(inputs.alpha, inputs.gamma_target)
    if factor <= 0.0:
        raise InfeasibleLoadError("infeasible load")
    return inputs.gamma_target * inputs.noise_half_psd / factor


def equal_power_pc(inputs: LsaInputs, h_sq: float) -> float:
    """Transmit power putting a user of squared gain ``h_sq`` at target.

    Valid when all users are received with the same power; diverges as the
    load approaches 1 + 1/target.
    """
    if h_sq <= 0:
        raise ValueError("squared gain must be positive")
    return _equal_power_received(inputs) / h_sq


def estimate_u2(inputs: LsaInputs) -> int:
    """Predicted number of users forced to transmit at the cap.

    Counts the quantile ranks whose equal-received-power transmit power
    exceeds the cap; a zero quantile (the weakest rank) always counts.
    """
    p_r = _equal_power_received(inputs)
    q = inputs.quantiles()
    with np.errstate(divide="ignore"):
        required = np.where(q > 0.0, p_r / np.where(q == 0.0, 1.0, q), np.inf)
    return int(np.sum(required > inputs.p_max))


def solve_receive_power(inputs: LsaInputs, u2: int) -> float:
    """Received power of the at-target users given ``u2`` capped users.

    The capped users interfere at the cap times their quantile gain; the
    remaining ones are modeled at the common received power.  With no
    capped users the balance is linear and returns the closed form used by
    :func:`equal_power_pc` exactly.
    """
    if not (0 <= u2 <= inputs.K):
        raise ValueError("u2 out of range")
    if u2 == 0:
        return _equal_power_received(inputs)
    gamma = inputs.gamma_target
    sigma = inputs.noise_half_psd
    n_eff = inputs.K / inputs.alpha
    u1 = inputs.K - u2
    capped_rx = inputs.p_max * np.array(
        [inputs.inv_cdf((inputs.K - i) / inputs.K)
         for i in range(inputs.K - u2 + 1, inputs.K + 1)])

    def residual(p: float) -> float:
        capped = float(np.sum(p * capped_rx / (p + capped_rx * gamma)))
        denom = n_eff * sigma + u1 * p / (1.0 + gamma) + capped
        return n_eff * p - gamma * denom

    hi = expand_upper(residual, 1e-300, gamma * sigma)
    if residual(hi) < 0.0:
        raise InfeasibleLoadError("target unreachable")
    return bisect_root(residual, 1e-300, hi, rtol=1e-14)


def distributed_power(inputs: LsaInputs, h_sq_own: float) -> float:
    """Transmit power rule needing only the user's own channel gain.

    The capped-user count and receive-power balance depend only on the
    population statistics, so each terminal can evaluate them locally.
    """
    p_k = solve_receive_power(inputs, estimate_u2(inputs))
    return min(p_k / h_sq_own, inputs.p_max)


def _capped_sinr(rank_rx: float, p_k: float, u1: int, other_capped_rx: np.ndarray,
                 inputs: LsaInputs) -> float:
    """SINR fixed point for a capped rank received at ``rank_rx``.

    The u1 at-target interferers are received at ``p_k``; the other capped
    interferers at their own capped received powers.
    """
    if rank_rx <= 0.0:
        return 0.0
    sigma = inputs.noise_half_psd
    n_eff = inputs.K / inputs.alpha

    def residual(x: float) -> float:
        at_target = (u1 / n_eff) * rank_rx * p_k / (rank_rx + p_k * x)
        capped = float(np.sum(rank_rx * other_capped_rx
                              / (rank_rx + other_capped_rx * x))) / n_eff
        return x * (sigma + at_target + capped) - rank_rx

    upper = rank_rx / sigma
    if residual(upper) < 0.0:
        raise InfeasibleLoadError("capped SINR fixed point not bracketed")
    return bisect_root(residual, 1e-12 * upper, upper, rtol=1e-13)


def profile_mmse(inputs: LsaInputs) -> LsaPrediction:
    """Profile prediction with MMSE receivers and no code optimization.

    At-target ranks transmit the receive-power balance over their quantile
    gain and sit exactly at the target SINR; capped ranks transmit the cap
    and their SINR solves the per-rank fixed point against a mix of
    at-target and capped interferers.
    """
    u2 = estimate_u2(inputs)
    p_k = solve_receive_power(inputs, u2)
    q = inputs.quantiles()
    K, u1 = inputs.K, inputs.K - u2
    powers = np.empty(K)
    sinrs = np.empty(K)
    with np.errstate(divide="ignore"):
        powers[:u1] = np.minimum(
            np.where(q[:u1] > 0, p_k / np.where(q[:u1] == 0, 1.0, q[:u1]), np.inf),
            inputs.p_max)
    sinrs[:u1] = inputs.gamma_target
    # ranks counted in u2 transmit at the cap
    powers[u1:] = inputs.p_max
    capped_rx = inputs.p_max * q[u1:]
    for j in range(u2):
        others = np.delete(capped_rx, j)
        sinrs[u1 + j] = _capped_sinr(capped_rx[j], p_k, u1, others, inputs)
    return LsaPrediction(powers=powers, sinrs=sinrs,
                         utilities=inputs._utilities(sinrs, powers),
                         u2=u2, receive_power=p_k)


def profile_orthogonal(inputs: LsaInputs) -> LsaPrediction:
    """Profile prediction when the codes converge to an orthogonal set.

    Each rank sees a clean single-user channel: uncapped ranks sit exactly
    at the target, capped ranks at cap power times their quantile gain over
    the noise.
    """
    sigma = inputs.noise_half_psd
    q = inputs.quantiles()
    with np.errstate(divide="ignore"):
        want = np.where(q > 0.0,
                        inputs.gamma_target * sigma / np.where(q == 0.0, 1.0, q),
                        np.inf)
    capped = want >= inputs.p_max
    powers = np.where(capped, inputs.p_max, want)
    sinrs = np.where(capped, inputs.p_max * q / sigma, inputs.gamma_target)
    return LsaPrediction(powers=powers, sinrs=sinrs,
                         utilities=inputs._utilities(sinrs, powers),
                         u2=int(np.sum(capped)),
                         receive_power=inputs.gamma_target * sigma)


def profile_wbe(inputs: LsaInputs) -> LsaPrediction:
    """Oversaturated profile under Welch-bound-equality codes.

    Assumes every user reaches the target SINR under equal received power;
    the received power has a closed form in the load.  Ranks with a zero
    quantile gain (the bottom of the population) are reported at the cap
    since the prescribed power diverges there.
    """
    gamma = inputs.gamma_target
    denom = 1.0 + gamma * (1.0 - inputs.alpha)
    if denom <= 0.0:
        raise InfeasibleLoadError("infeasible load")
    p_r = gamma * inputs.noise_half_psd / denom
    q = inputs.quantiles()
    with np.errstate(divide="ignore"):
        powers = np.where(q > 0.0, p_r / np.where(q == 0.0, 1.0, q), inputs.p_max)
    sinrs = np.full(inputs.K, gamma)
    return LsaPrediction(powers=powers, sinrs=sinrs,
                         utilities=inputs._utilities(sinrs, powers),
                         u2=int(np.sum(q == 0.0)), receive_power=p_r)


def social_optimum_sinr(inputs: LsaInputs, M: int) -> float:
    """Equal-SINR target maximizing the sum utility of the population.

    Root of g f'(g) [1 - g (alpha - 1)] = f(g); reduces to the
    non-cooperative target when the load is exactly one.
    """
    alpha = inputs.alpha

    # divided by the common factor (1 - exp(-g))^(M-1) to stay finite for
    # small g where the efficiency function underflows
    def residual(g: float) -> float:
        bracket = 1.0 - g * (alpha - 1.0)
        return M * g * np.exp(-g) * bracket - (-np.expm1(-g))

    # positive near zero (the derivative term dominates), negative for large g
    hi = 1.0
    for _ in range(200):
        if residual(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise InfeasibleLoadError("no feasible social target")
    root = bisect_root(residual, 1e-12, hi, rtol=1e-13)
    if 1.0 - root * (alpha - 1.0) <= 0.0:
        raise InfeasibleLoadError("no feasible social target")
    return root
