"""Total-MSE minimization by alternating receiver and code updates.

For fixed codes the MMSE receiver bank minimizes every per-user MSE; for a
fixed receiver bank the total MSE separates across codes, and each code
solves a quadratic program on the unit sphere.  The sphere constraint is
enforced through a diagonal shift of the receiver Gram matrix whose value
is located by bisection in the eigenbasis (the code norm is monotone in
the shift between its pole and infinity).

Alternating the two phases drives the total MSE down monotonically; with
no more users than the processing gain the codes converge to an orthogonal
set, and with more users than the processing gain under equal received
powers they converge to a Welch-bound-equality set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkState, SystemConfig, covariance, mmse_receiver_bank


@dataclass(frozen=True)
class TmseConfig:
    max_iters: int = 5000
    tmse_tol: float = 1e-10       # relative decrease per sweep that counts as converged
    mu_tol: float = 1e-10         # allowed deviation of the updated code norm from 1
    pseudo_rank_tol: float = 1e-12  # eigenvalues below this (relative) are treated as zero

    def __post_init__(self):
        if min(self.tmse_tol, self.mu_tol, self.pseudo_rank_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class TmseResult:
    codes: np.ndarray
    receivers: np.ndarray
    tmse_trace: list
    converged: bool
    step_trace: list | None = None  # per-operation TMSE when recorded


def tmse(state: NetworkState, cfg: SystemConfig) -> float:
    """Total MSE: sum of the per-user mean square errors."""
    M = covariance(state, cfg)
    quad = np.einsum("ij,ij->j", state.receivers, M @ state.receivers)
    cross = (np.sqrt(state.powers) * state.gains
             * np.einsum("ij,ij->j", state.receivers, state.codes))
    return float(np.sum(1.0 + quad - 2.0 * cross))


def receiver_sweep(state: NetworkState, cfg: SystemConfig) -> np.ndarray:
    """Replace every receiver by its MMSE solution for the current codes."""
    return mmse_receiver_bank(state, cfg)


def _clean_eigvals(eigvals: np.ndarray, rel_tol: float) -> np.ndarray:
    lam = np.maximum(np.asarray(eigvals, dtype=float), 0.0)
    top = lam.max() if lam.size else 0.0
    if top > 0.0:
        lam = np.where(lam < rel_tol * top, 0.0, lam)
    return lam


_PROJ_TOL = 1e-12


def _clean_projections(proj: np.ndarray) -> np.ndarray:
    """Zero rounding-noise eigenbasis coordinates of the target receiver.

    The receiver lies in the range of the receiver bank, so its coordinates
    on null eigendirections are pure floating-point noise; left in place
    they get amplified by the near-pole shift and corrupt the update.
    """
    top = np.max(np.abs(proj), axis=0) if proj.ndim > 1 else np.abs(proj).max()
    return np.where(np.abs(proj) <= _PROJ_TOL * top, 0.0, proj)


def _code_norm_sq(eigvals: np.ndarray, projections: np.ndarray, p_rx: float,
                  mu) -> np.ndarray:
    """Squared norm of the shifted-inverse code update, vectorized over mu."""
    mu = np.asarray(mu, dtype=float)
    den = eigvals + mu[..., None]
    inv = np.where(den != 0.0, 1.0 / np.where(den == 0.0, 1.0, den), 0.0)
    t = np.where(projections != 0.0, inv * projections, 0.0)
    return p_rx * np.sum(t * t, axis=-1)


def _norm_shift_bracket(eigvals: np.ndarray, projections: np.ndarray,
                        p_rx: float) -> tuple[float, float]:
    """Bracket [lo, hi] with code norm > 1 at lo and < 1 at hi.

    The norm has a pole at minus the smallest eigenvalue carrying a nonzero
    projection and decreases monotonically beyond it, so the pole term
    alone bounds the root from below and the total weight from above:
    keeping only the pole term, norm^2 > w_pole / (mu - pole)^2, while
    summing all terms, norm^2 < W / (mu - pole)^2.
    """
    active = projections != 0.0
    if not np.any(active):
        raise ValueError("code update undefined")
    weights = p_rx * projections[active] ** 2
    lam_act = eigvals[active]
    lam_min = float(np.min(lam_act))
    pole = -lam_min
    w_pole = float(np.max(weights[lam_act == lam_min]))
    total = float(np.sum(weights))
    lo = pole + math.sqrt(w_pole) * (1.0 - 1e-9)
    hi = pole + math.sqrt(total) * (1.0 + 1e-9)
    return lo, hi


def mu_search(eigvals: np.ndarray, projections: np.ndarray, p_rx: float,
              tcfg: TmseConfig) -> float:
    """Diagonal shift making the updated code exactly unit norm.

    eigvals      eigenvalues of the (received-power scaled) receiver Gram
    projections  eigenbasis coordinates of the target receiver
    p_rx         received power p_k h_k^2 scaling the update
    """
    eigvals = _clean_eigvals(eigvals, tcfg.pseudo_rank_tol)
    projections = _clean_projections(np.asarray(projections, dtype=float))
    lo, hi = _norm_shift_bracket(eigvals, projections, p_rx)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        n2 = _code_norm_sq(eigvals, projections, p_rx, np.array(mid))
        if n2 > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(abs(lo), abs(hi), 1e-30):
            break
    mu = 0.5 * (lo + hi)
    n = np.sqrt(_code_norm_sq(eigvals, projections, p_rx, np.array(mu)))
    if abs(n - 1.0) > tcfg.mu_tol:
        raise ValueError("norm constraint not met within tolerance")
    return float(mu)


def code_update(d_k: np.ndarray, D: np.ndarray, p_k: float, h_k: float,
                tcfg: TmseConfig) -> np.ndarray:
    """Unit-norm code minimizing the total MSE for a fixed receiver bank.

    Applies the shifted pseudo-inverse of the scaled receiver Gram matrix
    to the user's receiver, with the shift from :func:`mu_search`.
    """
    d_k = np.asarray(d_k, dtype=float)
    if not np.any(d_k):
        raise ValueError("code update undefined for a zero receiver")
    p_rx = p_k * h_k ** 2
    lam0, U = np.linalg.eigh(D @ D.T)
    lam = _clean_eigvals(p_rx * lam0, tcfg.pseudo_rank_tol)
    proj = _clean_projections(U.T @ d_k)
    mu = mu_search(lam, proj, p_rx, tcfg)
    den = lam + mu
    z = np.where(den != 0.0, 1.0 / np.where(den == 0.0, 1.0, den), 0.0)
    s = np.sqrt(p_rx) * (U @ np.where(proj != 0.0, z * proj, 0.0))
    return s / np.linalg.norm(s)


def _bulk_code_update(state: NetworkState, tcfg: TmseConfig) -> np.ndarray:
    """Update every code against the current receiver bank.

    One eigendecomposition of the receiver Gram matrix serves all users:
    scaling by the per-user received power only rescales the spectrum.
    The per-user norm shifts are then bisected simultaneously.
    """
    D = state.receivers
    rx = state.powers * state.gains ** 2          # (K,)
    lam0, U = np.linalg.eigh(D @ D.T)
    lam0 = _clean_eigvals(lam0, tcfg.pseudo_rank_tol)
    proj = _clean_projections(U.T @ D)             # (N, K)
    lam = np.outer(lam0, rx)                       # (N, K) per-user spectra

    active = proj != 0.0
    if not active.any(axis=0).all():
        raise ValueError("code update undefined")
    masked = np.where(active, lam, np.inf)
    pole = -masked.min(axis=0)
    weights = np.where(active, rx * proj * proj, 0.0)

    def norm_sq(mu_vec):
        # inactive eigendirections have zero weight, so a vanishing or
        # negative denominator there cannot contribute
        den = lam + mu_vec
        den2 = den * den
        return np.sum(weights / np.where(den2 == 0.0, 1.0, den2), axis=0)

    # analytic bracket around the pole: the pole term alone forces the norm
    # above one, the total weight caps it below one
    w_pole = np.where(masked == -pole, weights, 0.0).max(axis=0)
    total = weights.sum(axis=0)
    lo = pole + np.sqrt(w_pole) * (1.0 - 1e-9)
    hi = pole + np.sqrt(total) * (1.0 + 1e-9)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = norm_sq(mid) > 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(np.abs(hi), 1e-30)):
            break
    mu = 0.5 * (lo + hi)

    den = lam + mu
    z = np.where(den != 0.0, 1.0 / np.where(den == 0.0, 1.0, den), 0.0)
    S = U @ np.where(active, z * proj, 0.0) * np.sqrt(rx)
    return S / np.linalg.norm(S, axis=0)


def optimize(state: NetworkState, cfg: SystemConfig, tcfg: TmseConfig | None = None,
             record_steps: bool = False) -> TmseResult:
    """Run the alternating minimization until the total MSE stalls.

    Each sweep recomputes the MMSE receiver bank, then updates all codes
    (the code subproblems are independent once the receivers are fixed).
    ``record_steps`` additionally evaluates the TMSE after every receiver
    sweep and every single-user code update; this path is slower and meant
    for verification.
    """
    if tcfg is None:
        tcfg = TmseConfig()
    if np.any(state.powers <= 0.0):
        raise ValueError("inactive user has no receiver")
    work = state.copy()
    trace = [tmse(work, cfg)]
    steps = [trace[0]] if record_steps else None
    converged = False
    for _ in range(tcfg.max_iters):
        work.receivers = receiver_sweep(work, cfg)
        if record_steps:
            steps.append(tmse(work, cfg))
        if record_steps:
            for k in range(work.num_users):
                work.codes[:, k] = code_update(
                    work.receivers[:, k], work.receivers,
                    work.powers[k], work.gains[k], tcfg)
                steps.append(tmse(work, cfg))
        else:
            work.codes = _bulk_code_update(work, tcfg)
        current = tmse(work, cfg)
        previous = trace[-1]
        trace.append(current)
        if previous - current < tcfg.tmse_tol * max(previous, 1e-300):
            converged = True
            break
    return TmseResult(codes=work.codes, receivers=work.receivers,
                      tmse_trace=trace, converged=converged, step_trace=steps)
