import numpy as np
import pytest

from cfnoma import SystemConfig, estimation_stats, generate_drop
from cfnoma.estimation import (complex_normal, draw_small_scale, mmse_estimate,
                               pilot_observation, realize)
from cfnoma.scenario import NetworkDrop
from cfnoma.seeding import derive_rng


def drop_with_beta(beta, seed=0):
    beta = np.asarray(beta, dtype=float)
    M, N, K = beta.shape
    return NetworkDrop(
        ap_positions=np.zeros((M, 2)),
        cluster_centers=np.zeros((N, 2)),
        user_positions=np.zeros((N, K, 2)),
        beta=beta,
        master_seed=seed,
    )


def small_cfg(**kw):
    kw.setdefault("num_aps", 3)
    kw.setdefault("num_clusters", 2)
    kw.setdefault("antennas_per_ap", 4)
    return SystemConfig(**kw)


class TestEstimationStats:
    def test_hand_example(self):
        # tau * p_p = 4 with two users at beta = (0.5, 0.25):
        # denominator 1 + 4*0.75 = 4, c1 = 2*0.5/4, theta1 = 2*0.5*c1, a1 = 1/4
        cfg = SystemConfig(num_aps=1, num_clusters=1, users_per_cluster=2,
                           pilot_power=4.0)
        stats = estimation_stats(drop_with_beta([[[0.5, 0.25]]]), cfg)
        assert stats.theta_bar[0, 0] == pytest.approx(4.0)
        assert stats.c[0, 0, 0] == pytest.approx(0.25)
        assert stats.theta[0, 0, 0] == pytest.approx(0.25)
        assert stats.a[0, 0, 0] == pytest.approx(0.25)

    def test_zero_pilot_power(self):
        cfg = small_cfg(pilot_power=0.0)
        beta = np.full((3, 2, 2), 0.7)
        stats = estimation_stats(drop_with_beta(beta), cfg)
        assert np.all(stats.theta == 0) and np.all(stats.c == 0)
        np.testing.assert_allclose(stats.a ** 2, beta, rtol=1e-12)

    def test_perfect_estimation_limit(self):
        cfg = SystemConfig(num_aps=1, num_clusters=1, users_per_cluster=2,
                           power_split=(0.5, 0.5), pilot_power=1e12)
        beta = np.array([[[0.4, 1e-30]]])  # second user carries no energy
        stats = estimation_stats(drop_with_beta(beta), cfg)
        assert stats.theta[0, 0, 0] == pytest.approx(0.4, rel=1e-9)

    def test_identities_on_random_drop(self):
        cfg = SystemConfig()
        stats = estimation_stats(generate_drop(cfg, 17), cfg)
        beta = stats.beta
        tau_pp = cfg.pilot_length * cfg.pilot_power
        np.testing.assert_allclose(stats.theta,
                                   np.sqrt(tau_pp) * beta * stats.c, rtol=1e-12)
        np.testing.assert_allclose(stats.a ** 2 * stats.theta_bar[:, :, None],
                                   beta - stats.theta, rtol=1e-9)
        assert np.all(stats.theta <= beta * (1 + 1e-12))
        assert np.all(stats.theta >= 0)


class TestSmallScale:
    def test_deterministic_per_seed_and_trial(self):
        cfg = small_cfg()
        drop = drop_with_beta(np.full((3, 2, 2), 1.3))
        a = draw_small_scale(drop, cfg, seed=5, trial=2).h
        b = draw_small_scale(drop, cfg, seed=5, trial=2).h
        assert np.array_equal(a, b)
        assert not np.array_equal(a, draw_small_scale(drop, cfg, 5, trial=3).h)

    def test_zero_beta_gives_zero_channels(self):
        cfg = small_cfg()
        drop = drop_with_beta(np.zeros((3, 2, 2)))
        assert np.all(draw_small_scale(drop, cfg, 1).h == 0)

    def test_sample_power_matches_beta(self):
        cfg = small_cfg()
        beta = np.array([[[0.5, 2.0], [1.0, 0.25]]])
        drop = drop_with_beta(np.tile(beta, (3, 1, 1)))
        acc = np.zeros_like(drop.beta)
        trials = 4000
        for t in range(trials):
            h = draw_small_scale(drop, cfg, 7, trial=t).h
            acc += (np.abs(h) ** 2).mean(axis=-1)
        np.testing.assert_allclose(acc / trials, drop.beta, rtol=0.03)


class TestPilotObservation:
    def test_noiseless_single_user(self):
        cfg = SystemConfig(num_aps=2, num_clusters=2, users_per_cluster=1,
                           scheme="oma")
        drop = drop_with_beta(np.full((2, 2, 1), 0.8))
        chan = draw_small_scale(drop, cfg, 3)
        chan = pilot_observation(chan, cfg, 3, noise=False)
        tau_pp = cfg.pilot_length * cfg.pilot_power
        np.testing.assert_allclose(chan.hbar, np.sqrt(tau_pp) * chan.h[:, :, 0],
                                   rtol=1e-12)

    def test_column_variance(self):
        cfg = small_cfg()
        beta = np.full((3, 2, 2), 0.6)
        drop = drop_with_beta(beta)
        tau_pp = cfg.pilot_length * cfg.pilot_power
        expected = 1.0 + tau_pp * beta.sum(axis=2)
        acc = np.zeros((3, 2))
        trials = 4000
        for t in range(trials):
            chan = pilot_observation(draw_small_scale(drop, cfg, 11, t), cfg, 11, t)
            acc += (np.abs(chan.hbar) ** 2).mean(axis=-1)
        np.testing.assert_allclose(acc / trials, expected, rtol=0.03)

    def test_columns_uncorrelated_across_clusters(self):
        cfg = small_cfg(antennas_per_ap=4)
        drop = drop_with_beta(np.full((3, 2, 2), 0.6))
        trials = 4000
        acc = np.zeros(3, dtype=complex)
        for t in range(trials):
            chan = pilot_observation(draw_small_scale(drop, cfg, 13, t), cfg, 13, t)
            acc += (chan.hbar[:, 0, :] * np.conj(chan.hbar[:, 1, :])).mean(axis=-1)
        var = 1.0 + cfg.pilot_length * cfg.pilot_power * drop.beta[:, 0].sum(axis=-1)
        corr = np.abs(acc / trials) / var
        # zero-mean complex estimator averaged over trials * L entries
        assert np.all(corr < 3.5 / np.sqrt(trials * cfg.antennas_per_ap))


class TestMmseEstimate:
    def test_parallel_estimates(self):
        cfg = small_cfg()
        drop = drop_with_beta(np.abs(np.random.default_rng(3).normal(1, 0.3, (3, 2, 2))))
        stats = estimation_stats(drop, cfg)
        chan = realize(drop, cfg, stats, seed=19)
        ratio = drop.beta[:, :, 0] / drop.beta[:, :, 1]
        np.testing.assert_allclose(chan.hhat[:, :, 0, :],
                                   ratio[:, :, None] * chan.hhat[:, :, 1, :],
                                   rtol=1e-12)
        # the error is defined as the residual, so the decomposition is exact
        np.testing.assert_array_equal(chan.eps, chan.h - chan.hhat)
        np.testing.assert_allclose(chan.hhat + chan.eps, chan.h,
                                   rtol=1e-12, atol=1e-14)

    def test_estimate_variance_and_orthogonality(self):
        cfg = small_cfg()
        drop = drop_with_beta(np.full((3, 2, 2), 0.9))
        stats = estimation_stats(drop, cfg)
        trials = 4000
        var = np.zeros_like(stats.theta)
        cross = np.zeros_like(stats.theta, dtype=complex)
        for t in range(trials):
            chan = realize(drop, cfg, stats, seed=23, trial=t)
            var += (np.abs(chan.hhat) ** 2).mean(axis=-1)
            cross += (chan.hhat * np.conj(chan.eps)).mean(axis=-1)
        np.testing.assert_allclose(var / trials, stats.theta, rtol=0.03)
        scale = np.sqrt(stats.theta * (stats.beta - stats.theta)) + 1e-30
        assert np.all(np.abs(cross / trials) / scale
                      < 4.0 / np.sqrt(trials * cfg.antennas_per_ap))

    def test_shape_mismatch_rejected(self):
        cfg = small_cfg()
        drop = drop_with_beta(np.full((3, 2, 2), 0.9))
        other = drop_with_beta(np.full((3, 3, 2), 0.9))
        cfg3 = small_cfg(num_clusters=3)
        stats3 = estimation_stats(other, cfg3)
        chan = pilot_observation(draw_small_scale(drop, cfg, 1), cfg, 1)
        with pytest.raises(ValueError):
            mmse_estimate(chan, stats3)


class TestMomentIdentities:
    def test_wishart_fourth_moment(self):
        # E |z^H z|^2 = (L^2 + L) theta^2 for z ~ CN(0, theta I_L)
        L, theta, draws = 8, 0.7, 100_000
        rng = derive_rng(31, "wishart-test")
        z = complex_normal(rng, (draws, L), np.sqrt(theta))
        measured = np.mean(np.abs(np.einsum("ti,ti->t", np.conj(z), z)) ** 2)
        assert measured == pytest.approx((L * L + L) * theta ** 2, rel=0.02)

    def test_gram_inverse_diagonal(self):
        # E [ (Hbar^H Hbar)^{-1} ]_nn = 1 / ((L - N) theta_bar)
        cfg = SystemConfig(num_aps=1, num_clusters=4, antennas_per_ap=12)
        drop = drop_with_beta(np.full((1, 4, 2), 0.8))
        stats = estimation_stats(drop, cfg)
        draws = 8000
        acc = np.zeros(4)
        for t in range(draws):
            chan = pilot_observation(draw_small_scale(drop, cfg, 37, t), cfg, 37, t)
            H = chan.hbar[0].T  # (L, N)
            gram = H.conj().T @ H
            acc += np.diag(np.linalg.inv(gram)).real
        expected = 1.0 / ((12 - 4) * stats.theta_bar[0])
        np.testing.assert_allclose(acc / draws, expected, rtol=0.03)
