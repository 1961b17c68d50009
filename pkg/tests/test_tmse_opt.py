import numpy as np
import pytest

from eecdma.model import NetworkState, covariance, mse, sinr, sinr_all
from eecdma.tmse_opt import (TmseConfig, _code_norm_sq, _norm_shift_bracket,
                             code_update, mu_search, optimize, receiver_sweep,
                             tmse)

from conftest import make_cfg, random_state, uplink_cfg

TCFG = TmseConfig()


class TestTmseValue:
    def test_zero_receivers_count_users(self, rng):
        cfg = make_cfg(K=5, N=8)
        state = random_state(cfg, rng)
        state.receivers = np.zeros((8, 5))
        assert tmse(state, cfg) == pytest.approx(5.0)

    def test_orthogonal_equal_sinr(self):
        # equal received powers on orthogonal codes: K copies of 1/(1+g)
        cfg = make_cfg(K=3, N=5, noise_psd=0.5)
        codes = np.eye(5)[:, :3]
        state = NetworkState(np.array([1.0, 4.0, 0.25]),
                             np.array([1.0, 0.5, 2.0]), codes, codes.copy())
        state.receivers = receiver_sweep(state, cfg)
        g = sinr(state, cfg, 0)
        assert tmse(state, cfg) == pytest.approx(3.0 / (1.0 + g), rel=1e-12)

    def test_matches_per_user_sum(self, rng):
        cfg = make_cfg(K=4, N=6)
        state = random_state(cfg, rng, mmse=True)
        total = sum(mse(state, cfg, k) for k in range(4))
        assert tmse(state, cfg) == pytest.approx(total, rel=1e-12)


class TestReceiverSweep:
    def test_single_user_matched(self):
        cfg = make_cfg(K=1, N=4)
        s = np.ones((4, 1)) / 2.0
        state = NetworkState(np.array([0.9]), np.array([1.0]), s, s.copy())
        D = receiver_sweep(state, cfg)
        cos = (D[:, 0] @ s[:, 0]) / np.linalg.norm(D[:, 0])
        assert cos == pytest.approx(1.0, rel=1e-12)

    def test_columns_beat_random_probes(self, rng):
        cfg = make_cfg(K=3, N=5)
        state = random_state(cfg, rng)
        state.receivers = receiver_sweep(state, cfg)
        best = sinr_all(state, cfg)
        for _ in range(200):
            probe = state.copy()
            probe.receivers = rng.normal(size=(5, 3))
            assert np.all(sinr_all(probe, cfg) <= best * (1 + 1e-9))

    def test_never_increases_tmse(self, rng):
        for _ in range(25):
            cfg = make_cfg(K=int(rng.integers(2, 7)), N=8)
            state = random_state(cfg, rng)
            state.receivers = rng.normal(size=(8, cfg.K))
            before = tmse(state, cfg)
            state.receivers = receiver_sweep(state, cfg)
            assert tmse(state, cfg) <= before + 1e-12 * max(1.0, before)


class TestMuSearch:
    def test_single_eigenvalue(self):
        # norm 2/(1+mu) crosses one at mu = 1
        mu = mu_search(np.array([1.0]), np.array([2.0]), 1.0, TCFG)
        assert mu == pytest.approx(1.0, abs=1e-9)

    def test_shifted_identity(self):
        # identity receiver Gram, receiver of length 2, unit received power
        eig = np.ones(4)
        proj = np.array([1.0, 1.0, 1.0, 1.0])
        mu = mu_search(eig, proj, 1.0, TCFG)
        assert mu == pytest.approx(1.0, abs=1e-9)

    def test_all_zero_projections_rejected(self):
        with pytest.raises(ValueError, match="code update undefined"):
            mu_search(np.array([1.0, 2.0]), np.zeros(2), 1.0, TCFG)

    def test_norm_residual_on_random_spectra(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 10))
            eig = np.sort(rng.uniform(0.0, 5.0, n))
            proj = rng.normal(size=n)
            p_rx = float(rng.uniform(0.1, 10.0))
            mu = mu_search(eig, proj, p_rx, TCFG)
            norm = np.sqrt(_code_norm_sq(eig, proj, p_rx, np.array(mu)))
            assert abs(norm - 1.0) <= TCFG.mu_tol

    def test_bracket_straddles_unit_norm(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 8))
            eig = rng.uniform(0.0, 3.0, n)
            proj = rng.normal(size=n)
            p_rx = float(rng.uniform(0.1, 5.0))
            lo, hi = _norm_shift_bracket(eig, proj, p_rx)
            assert _code_norm_sq(eig, proj, p_rx, np.array(lo)) > 1.0
            assert _code_norm_sq(eig, proj, p_rx, np.array(hi)) < 1.0


class TestCodeUpdate:
    def test_shifted_identity_halves_receiver(self, rng):
        # receiver Gram is the identity, received power one, |d| = 2
        d = rng.normal(size=6)
        d *= 2.0 / np.linalg.norm(d)
        D = np.eye(6)
        s = code_update(d, D, 1.0, 1.0, TCFG)
        assert np.allclose(s, d / 2.0, atol=1e-9)

    def test_single_user_keeps_direction(self, rng):
        d = rng.normal(size=5)
        s = code_update(d, d[:, None], 0.7, 1.3, TCFG)
        cos = s @ d / np.linalg.norm(d)
        assert cos == pytest.approx(1.0, rel=1e-9)

    def test_zero_receiver_rejected(self):
        with pytest.raises(ValueError):
            code_update(np.zeros(4), np.eye(4), 1.0, 1.0, TCFG)

    def test_matches_eigenbasis_form(self, rng):
        # reconstruct through the eigendecomposition at the found shift
        cfg = make_cfg(K=4, N=6)
        state = random_state(cfg, rng, mmse=True)
        D = state.receivers
        for k in range(4):
            p_rx = state.powers[k] * state.gains[k] ** 2
            s = code_update(D[:, k], D, state.powers[k], state.gains[k], TCFG)
            assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-9)
            lam0, U = np.linalg.eigh(D @ D.T)
            lam = np.maximum(lam0, 0.0) * p_rx
            proj = U.T @ D[:, k]
            mu = mu_search(lam, proj, p_rx, TCFG)
            z = np.where(lam + mu != 0.0, 1.0 / (lam + mu), 0.0)
            ref = np.sqrt(p_rx) * (U @ (z * proj))
            ref /= np.linalg.norm(ref)
            assert np.allclose(s, ref, atol=1e-8)

    def test_never_increases_tmse(self, rng):
        for _ in range(25):
            cfg = make_cfg(K=int(rng.integers(2, 7)), N=8)
            state = random_state(cfg, rng, mmse=True)
            before = tmse(state, cfg)
            k = int(rng.integers(cfg.K))
            state.codes[:, k] = code_update(
                state.receivers[:, k], state.receivers, state.powers[k],
                state.gains[k], TCFG)
            assert tmse(state, cfg) <= before + 1e-12 * max(1.0, before)


class TestOptimize:
    def test_small_system_goes_orthogonal(self, rng):
        # received powers at a working SINR; far above the noise floor the
        # total MSE flattens and the code iteration crawls
        cfg = uplink_cfg(K=2, N=4)
        for _ in range(5):
            state = random_state(cfg, rng)
            state.powers = (rng.uniform(2.0, 12.0, 2) * cfg.noise_half
                            / state.gains ** 2)
            res = optimize(state, cfg, TmseConfig(tmse_tol=1e-14))
            cross = abs(res.codes[:, 0] @ res.codes[:, 1])
            assert cross < 1e-6
            final = NetworkState(state.powers, state.gains, res.codes,
                                 res.receivers)
            single = state.powers * state.gains ** 2 / cfg.noise_half
            assert np.allclose(sinr_all(final, cfg), single, rtol=1e-6)

    def test_square_system_orthogonal_and_wbe(self, rng):
        # K = N with equal received powers: both limits coincide
        cfg = make_cfg(K=6, N=6, noise_psd=0.4, p_max=50.0)
        gains = rng.uniform(0.5, 2.0, 6)
        powers = 2.0 / gains ** 2
        codes = rng.normal(size=(6, 6))
        codes /= np.linalg.norm(codes, axis=0)
        state = NetworkState(powers, gains, codes, codes.copy())
        res = optimize(state, cfg, TmseConfig(tmse_tol=1e-15, max_iters=20000))
        assert np.abs(res.codes.T @ res.codes - np.eye(6)).max() < 1e-6
        gram = (res.codes * (powers * gains ** 2)) @ res.codes.T
        assert np.abs(gram - 2.0 * np.eye(6)).max() < 1e-6 * 2.0

    def test_trace_is_monotone(self, rng):
        cfg = make_cfg(K=5, N=4)  # oversaturated small case
        state = random_state(cfg, rng)
        res = optimize(state, cfg)
        trace = np.array(res.tmse_trace)
        assert np.all(np.diff(trace) <= 1e-12 * np.maximum(trace[:-1], 1.0))

    def test_step_trace_is_monotone(self, rng):
        cfg = make_cfg(K=4, N=3)
        state = random_state(cfg, rng)
        res = optimize(state, cfg, TmseConfig(max_iters=40), record_steps=True)
        steps = np.array(res.step_trace)
        assert np.all(np.diff(steps) <= 1e-12 * np.maximum(steps[:-1], 1.0))

    def test_fixed_point_under_resweep(self, rng):
        cfg = make_cfg(K=3, N=6)
        state = random_state(cfg, rng)
        tcfg = TmseConfig(tmse_tol=1e-12)
        res = optimize(state, cfg, tcfg)
        again = NetworkState(state.powers, state.gains, res.codes,
                             res.receivers)
        res2 = optimize(again, cfg, tcfg)
        assert len(res2.tmse_trace) <= 3
        assert abs(res2.tmse_trace[-1] - res.tmse_trace[-1]) \
            <= 1e-10 * res.tmse_trace[-1]

    def test_bulk_update_matches_per_user_ops(self, rng):
        cfg = make_cfg(K=5, N=7)
        state = random_state(cfg, rng, mmse=True)
        from eecdma.tmse_opt import _bulk_code_update
        bulk = _bulk_code_update(state, TCFG)
        for k in range(5):
            ref = code_update(state.receivers[:, k], state.receivers,
                              state.powers[k], state.gains[k], TCFG)
            assert np.allclose(bulk[:, k], ref, atol=1e-8)

    def test_pareto_probe_at_convergence(self, rng):
        # no code perturbation may raise one SINR without lowering another
        cfg = make_cfg(K=3, N=4)
        state = random_state(cfg, rng)
        res = optimize(state, cfg, TmseConfig(tmse_tol=1e-14))
        base_state = NetworkState(state.powers, state.gains, res.codes,
                                  res.receivers)
        base = sinr_all(base_state, cfg)
        wins = 0
        for _ in range(200):
            pert = res.codes + 0.02 * rng.normal(size=res.codes.shape)
            pert /= np.linalg.norm(pert, axis=0)
            probe = NetworkState(state.powers, state.gains, pert, pert.copy())
            probe.receivers = receiver_sweep(probe, cfg)
            gammas = sinr_all(probe, cfg)
            if np.all(gammas >= base * (1 - 1e-12)) and np.any(
                    gammas > base * (1 + 1e-9)):
                wins += 1
        assert wins == 0

    def test_inactive_user_rejected(self, rng):
        cfg = make_cfg(K=3, N=4)
        state = random_state(cfg, rng)
        state.powers[0] = 0.0
        with pytest.raises(ValueError, match="inactive"):
            optimize(state, cfg)

    def test_iteration_budget_reports_nonconvergence(self, rng):
        cfg = make_cfg(K=4, N=6)
        state = random_state(cfg, rng)
        res = optimize(state, cfg, TmseConfig(max_iters=2, tmse_tol=1e-15))
        assert not res.converged
        assert len(res.tmse_trace) == 3  # initial value plus two sweeps
        assert res.tmse_trace[-1] <= res.tmse_trace[0]
