"""Non-cooperative utility-maximization games and their equilibria.

Three single-cell variants are supported: power control against a fixed
matched filter, joint power control and MMSE receiver adaptation, and the
full cross-layer game that additionally optimizes the spreading codes.
Multi-cell counterparts reuse the same engine with per-access-point
covariances; a single-access-point multi-cell run therefore reproduces the
single-cell run operation for operation.

Every variant alternates an optimization phase (receivers and, when
enabled, codes) with capped target-SINR power-control iterations, until
the power vector stops moving.  At the equilibrium each user either meets
the common target SINR or transmits at the power cap.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import tmse_opt as tmse_mod
from .model import (GameOutcome, NetworkState, SystemConfig, efficiency,
                    sinr_all, utility_all)
from .solvers import bisect_root, expand_upper


class GameVariant(enum.Enum):
    POWER_ONLY_MF = "POWER_ONLY_MF"          # matched filter, power control only
    POWER_MMSE = "POWER_MMSE"                # MMSE receivers + power control
    FULL_CROSS_LAYER = "FULL_CROSS_LAYER"    # codes + receivers + power control
    MULTICELL_POWER_MMSE = "MULTICELL_POWER_MMSE"
    MULTICELL_FULL = "MULTICELL_FULL"


@dataclass(frozen=True)
class GameConfig:
    target_sinr_tol: float = 1e-10
    power_tol: float = 1e-6        # outer-loop relative power change at convergence
    outer_max_iters: int = 100
    pc_tol: float = 1e-8           # inner power-control relative tolerance
    pc_max_iters: int = 5000
    code_fp_tol: float = 1e-11     # multi-cell code iteration drift tolerance
    code_fp_max_iters: int = 5000
    tmse: tmse_mod.TmseConfig = field(default_factory=tmse_mod.TmseConfig)
    # code-design budget for outer rounds after the first; warm restarts
    # need far fewer sweeps than a cold start
    tmse_warm_max_iters: int = 150

    def __post_init__(self):
        if min(self.target_sinr_tol, self.power_tol, self.pc_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class MultiCellState:
    """Game state for a network with several access points.

    gains       (B, K) amplitude gains between every AP and every user
    assignment  (K,) index of the AP that decodes each user
    """

    num_aps: int
    gains: np.ndarray
    assignment: np.ndarray
    powers: np.ndarray
    codes: np.ndarray
    receivers: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.assignment = np.asarray(self.assignment, dtype=int)
        self.powers = np.asarray(self.powers, dtype=float)
        self.codes = np.asarray(self.codes, dtype=float)
        self.receivers = np.asarray(self.receivers, dtype=float)
        if self.gains.shape[0] != self.num_aps:
            raise ValueError("gain matrix row count must equal num_aps")
        if np.any(self.assignment < 0) or np.any(self.assignment >= self.num_aps):
            raise ValueError("assignment indices out of range")

    @property
    def num_users(self) -> int:
        return self.codes.shape[1]

    def copy(self) -> "MultiCellState":
        return MultiCellState(self.num_aps, self.gains.copy(),
                              self.assignment.copy(), self.powers.copy(),
                              self.codes.copy(), self.receivers.copy())


def target_sinr(M: int, tol: float = 1e-10) -> float:
    """Common target SINR: the positive root of f(g) = g f'(g).

    At this SINR the throughput-per-power utility of a user whose SINR is
    proportional to its own power is maximized.  Unique because the
    efficiency function is S-shaped.
    """
    if M < 2:
        raise ValueError("packet length must be at least 2")

    # f - g f' shares its positive root with the underflow-safe form below
    # (divide by the common factor (1 - exp(-g))^(M-1) > 0).
    def g(x: float) -> float:
        base = -np.expm1(-x)
        return base - M * x * np.exp(-x)

    hi = expand_upper(g, 1e-12, 1.0)
    return bisect_root(g, 1e-12, hi, rtol=tol)


def power_control_step(state: NetworkState, cfg: SystemConfig,
                       gamma_target: float) -> np.ndarray:
    """One capped target-SINR power update p <- min(p_max, p * target/g)."""
    gammas = sinr_all(state, cfg)
    if np.any((gammas == 0.0) & (state.powers > 0.0)):
        raise ValueError("degenerate SINR")
    return np.minimum(cfg.p_max, state.powers * gamma_target / gammas)


# ---------------------------------------------------------------------------
# shared single/multi-cell engine
# ---------------------------------------------------------------------------

def _ap_receivers(codes, powers, gains_ap, assignment, noise_half):
    """MMSE receivers evaluated at each user's assigned access point."""
    N, K = codes.shape
    D = np.empty_like(codes)
    for ap in range(gains_ap.shape[0]):
        users = np.flatnonzero(assignment == ap)
        if users.size == 0:
            continue
        rx = powers * gains_ap[ap] ** 2
        M = (codes * rx) @ codes.T
        M[np.diag_indices(N)] += noise_half
        c = cho_factor(0.5 * (M + M.T))
        D[:, users] = cho_solve(c, codes[:, users]) * (
            np.sqrt(powers[users]) * gains_ap[ap, users])
    return D


def _ap_sinrs(codes, receivers, powers, gains_ap, assignment, noise_half):
    """Per-user SINR at the assigned access point."""
    G2 = (receivers.T @ codes) ** 2                     # (K, K)
    dnorm2 = np.einsum("ij,ij->j", receivers, receivers)
    rx_rows = powers * gains_ap[assignment] ** 2        # (K, K): row k holds p_i h_{a(k),i}^2
    own = rx_rows[np.arange(len(powers)), np.arange(len(powers))] * np.diag(G2)
    total = np.einsum("ki,ki->k", rx_rows, G2)
    return own / (noise_half * dnorm2 + total - own)


def _pc_fixed_point(codes, receivers, powers, gains_ap, assignment, cfg,
                    gamma_target, gcfg):
    """Iterate capped power control with frozen receivers to its fixed point."""
    G2 = (receivers.T @ codes) ** 2
    dnorm2 = np.einsum("ij,ij->j", receivers, receivers)
    g2_rows = gains_ap[assignment] ** 2
    idx = np.arange(len(powers))
    own_coef = g2_rows[idx, idx] * G2[idx, idx]
    if np.any(own_coef == 0.0):
        raise ValueError("degenerate SINR")
    W = g2_rows * G2
    np.fill_diagonal(W, 0.0)
    p = powers.copy()
    for _ in range(gcfg.pc_max_iters):
        gammas = p * own_coef / (cfg.noise_half * dnorm2 + W @ p)
        p_new = np.minimum(cfg.p_max, p * gamma_target / gammas)
        change = np.max(np.abs(p_new - p) / np.maximum(p, 1e-300))
        p = p_new
        if change < gcfg.pc_tol:
            break
    return p


def _run_engine(gains_ap, assignment, powers0, codes0, cfg, variant, gcfg):
    """Outer alternation shared by all game variants.

    Each round optimizes receivers (and codes, when enabled) at the current
    powers and then runs power control to its fixed point; convergence is
    declared when the power vector stops moving between rounds.  Beyond the
    feasible load the alternation can fall into a limit cycle (the capped
    set flips between rounds); a stalled power change is detected early and
    reported as non-convergence with the last iterate.
    Returns (powers, codes, receivers, sinrs, outer_iterations, converged).
    """
    gamma_bar = target_sinr(cfg.M, gcfg.target_sinr_tol)
    p = np.asarray(powers0, dtype=float).copy()
    if np.any(p <= 0.0) or np.any(p > cfg.p_max * (1 + 1e-12)):
        raise ValueError("initial powers must lie in (0, p_max]")
    S = np.asarray(codes0, dtype=float).copy()
    D = S.copy()
    gains_ap = np.asarray(gains_ap, dtype=float)
    assignment = np.asarray(assignment, dtype=int)
    converged = False
    outer = 0
    changes = []
    for outer in range(1, gcfg.outer_max_iters + 1):
        p_prev = p
        if variant is GameVariant.POWER_ONLY_MF:
            D = S
        elif variant in (GameVariant.POWER_MMSE, GameVariant.MULTICELL_POWER_MMSE):
            D = _ap_receivers(S, p, gains_ap, assignment, cfg.noise_half)
        elif variant is GameVariant.FULL_CROSS_LAYER:
            tcfg = gcfg.tmse
            if outer > 1:
                tcfg = dataclasses.replace(
                    tcfg, max_iters=min(tcfg.max_iters, gcfg.tmse_warm_max_iters))
            state = NetworkState(p, gains_ap[0], S, D)
            res = tmse_mod.optimize(state, cfg, tcfg)
            S, D = res.codes, res.receivers
        elif variant is GameVariant.MULTICELL_FULL:
            S, D = _code_fixed_point(S, p, gains_ap, assignment, cfg, gcfg)
        else:
            raise ValueError(f"unknown variant {variant}")
        p = _pc_fixed_point(S, D, p, gains_ap, assignment, cfg, gamma_bar,
                            gcfg)
        change = np.max(np.abs(p - p_prev) / np.maximum(p_prev, 1e-300))
        changes.append(change)
        if change < gcfg.power_tol:
            converged = True
            break
        if (len(changes) >= 4 and change > 10 * gcfg.power_tol
                and change >= 0.5 * changes[-3]):
            break
    sinrs = _ap_sinrs(S, D, p, gains_ap, assignment, cfg.noise_half)
    return p, S, D, sinrs, outer, converged


def _code_fixed_point(S, p, gains_ap, assignment, cfg, gcfg):
    """Multi-cell joint code/receiver iteration: normalized MMSE receivers.

    Each round replaces every receiver by the MMSE solution at the user's
    assigned access point and every code by its normalized receiver, until
    the codes stop moving.
    """
    S = S.copy()
    for _ in range(gcfg.code_fp_max_iters):
        D = _ap_receivers(S, p, gains_ap, assignment, cfg.noise_half)
        S_new = D / np.linalg.norm(D, axis=0)
        drift = np.max(np.abs(S_new - S))
        S = S_new
        if drift < gcfg.code_fp_tol:
            break
    D = _ap_receivers(S, p, gains_ap, assignment, cfg.noise_half)
    return S, D


def run_game(state: NetworkState, cfg: SystemConfig, variant: GameVariant,
             gcfg: GameConfig | None = None) -> GameOutcome:
    """Run a single-cell game variant to its Nash equilibrium."""
    if gcfg is None:
        gcfg = GameConfig()
    if variant not in (GameVariant.POWER_ONLY_MF, GameVariant.POWER_MMSE,
                       GameVariant.FULL_CROSS_LAYER):
        raise ValueError("multi-cell variants require run_game_multicell")
    state.validate(cfg)
    gains_ap = state.gains[None, :]
    assignment = np.zeros(state.num_users, dtype=int)
    p, S, D, sinrs, outer, converged = _run_engine(
        gains_ap, assignment, state.powers, state.codes, cfg, variant, gcfg)
    final = NetworkState(p, state.gains.copy(), S, D)
    return GameOutcome(state=final, sinrs=sinrs,
                       utilities=utility_all(p, sinrs, cfg),
                       iterations_used=outer, converged=converged)


def run_game_multicell(state: MultiCellState, cfg: SystemConfig,
                       variant: GameVariant,
                       gcfg: GameConfig | None = None) -> GameOutcome:
    """Run a multi-cell game variant to its equilibrium.

    Joint code optimization is only defined for populations no larger than
    the processing gain; oversized populations are rejected.
    """
    if gcfg is None:
        gcfg = GameConfig()
    if variant not in (GameVariant.MULTICELL_POWER_MMSE, GameVariant.MULTICELL_FULL):
        raise ValueError("single-cell variants require run_game")
    if variant is GameVariant.MULTICELL_FULL and state.num_users > cfg.N:
        raise ValueError(
            "joint code optimization in the multi-cell game requires K <= N")
    p, S, D, sinrs, outer, converged = _run_engine(
        state.gains, state.assignment, state.powers, state.codes, cfg,
        variant, gcfg)
    final = MultiCellState(state.num_aps, state.gains.copy(),
                           state.assignment.copy(), p, S, D)
    return GameOutcome(state=final, sinrs=sinrs,
                       utilities=utility_all(p, sinrs, cfg),
                       iterations_used=outer, converged=converged)


def unilateral_power_probe(outcome: GameOutcome, cfg: SystemConfig,
                           n_grid: int = 200) -> np.ndarray:
    """Best relative utility gain each user can get by moving its own power.

    Sweeps a power grid on (0, p_max] per user with everything else frozen;
    own SINR scales linearly through the origin in own power because the
    interference term does not involve it.  Returns one ratio per user
    (positive means the user could improve, so not an equilibrium).
    """
    st = outcome.state
    grid = cfg.p_max * (np.arange(1, n_grid + 1) / n_grid)
    gains = np.empty(len(outcome.sinrs))
    for k, (p_eq, g_eq, u_eq) in enumerate(
            zip(st.powers, outcome.sinrs, outcome.utilities)):
        g_on_grid = g_eq * grid / p_eq
        u_on_grid = cfg.R * (cfg.L / cfg.M) * efficiency(g_on_grid, cfg.M) / grid
        gains[k] = (u_on_grid.max() - u_eq) / max(u_eq, 1e-300)
    return gains
