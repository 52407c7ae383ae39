import numpy as np
import pytest

from cfnoma import ConvergenceFailure, SystemConfig, estimation_stats, generate_drop
from cfnoma import detequiv
from cfnoma.detequiv import (dense_reference, derivative_terms, psi_and_upsilon,
                             solve_fixed_point)
from cfnoma.estimation import EstimationStats
from cfnoma.noma import PowerAllocation

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def make_power(p_nk):
    p_nk = np.asarray(p_nk, dtype=float)
    N, K = p_nk.shape
    return PowerAllocation(lambda_nk=p_nk / p_nk.sum(), p_nk=p_nk,
                           p_n=p_nk.sum(axis=1),
                           ordering=np.tile(np.arange(K), (N, 1)))


class TestFixedPoint:
    def test_golden_ratio(self):
        # all traces 1, alpha = 1, L = N: substitution gives e^2 + e - 1 = 0
        for n in (1, 4, 9):
            e, t, _, _ = solve_fixed_point(np.ones((2, n)), alpha=1.0, L=n)
            np.testing.assert_allclose(e, GOLDEN, atol=1e-9)
            np.testing.assert_allclose(t, GOLDEN, atol=1e-9)

    def test_no_interference_limit(self):
        # a huge antenna count empties the interference sum: e -> theta_bar/alpha
        theta_bar = np.array([[2.0, 0.5]])
        e, _, _, _ = solve_fixed_point(theta_bar, alpha=0.8, L=10 ** 12)
        np.testing.assert_allclose(e, theta_bar / 0.8, rtol=1e-9)

    def test_zero_trace_gives_zero(self):
        e, t, _, _ = solve_fixed_point(np.zeros((1, 3)), alpha=0.5, L=4)
        np.testing.assert_array_equal(e, 0.0)
        assert t[0] == pytest.approx(2.0)

    def test_empty_cluster_edge(self):
        e, t, iters, residual = solve_fixed_point(np.zeros((2, 0)), alpha=0.5, L=4)
        assert e.shape == (2, 0) and iters == 0 and residual == 0.0
        np.testing.assert_allclose(t, 2.0)

    def test_converges_across_alpha_range(self):
        cfg = SystemConfig(antennas_per_ap=16)
        stats = estimation_stats(generate_drop(cfg, 3), cfg)
        for alpha in (0.1, 0.3, 1.0, 3.0, 10.0):
            e, _, iters, residual = solve_fixed_point(stats.theta_bar, alpha, 16)
            assert np.all(e > 0)
            assert residual <= 1e-12

    def test_nonconvergence_carries_residual(self):
        with pytest.raises(ConvergenceFailure) as err:
            solve_fixed_point(np.ones((1, 4)), alpha=1.0, L=4, max_iter=2)
        assert err.value.residual > 0
        assert err.value.iterations == 2


class TestDerivatives:
    def test_single_cluster_closed_form(self):
        # N = L = 1, unit trace, alpha = 1: v = t^2, J = t^2/(1+e)^2,
        # e' = v / (1 - J), all expressible through the golden ratio
        e, t, _, _ = solve_fixed_point(np.ones((1, 1)), alpha=1.0, L=1)
        e_prime, e_dir = derivative_terms(e, t, np.ones((1, 1)), L=1)
        v = t[0] ** 2
        j = t[0] ** 2 / (1.0 + e[0, 0]) ** 2
        assert e_prime[0, 0] == pytest.approx(v / (1.0 - j), rel=1e-9)
        assert e_dir[0, 0, 0] == pytest.approx(e_prime[0, 0], rel=1e-9)

    def test_directional_is_scaled_base_solution(self):
        # scalar covariances make every directional right-hand side a multiple
        # of the base one, so the solutions scale the same way
        rng = np.random.default_rng(8)
        theta_bar = rng.uniform(0.5, 3.0, size=(3, 5))
        e, t, _, _ = solve_fixed_point(theta_bar, alpha=0.7, L=8)
        e_prime, e_dir = derivative_terms(e, t, theta_bar, L=8)
        expected = e_prime[:, :, None] * theta_bar[:, None, :]
        np.testing.assert_allclose(e_dir, expected, rtol=1e-10)

    def test_contraction_on_realistic_drops(self):
        cfg = SystemConfig(antennas_per_ap=16)
        stats = estimation_stats(generate_drop(cfg, 5), cfg)
        e, t, _, _ = solve_fixed_point(stats.theta_bar, 0.8, 16)
        tsq = t ** 2
        damp = stats.theta_bar / (1.0 + e) ** 2
        J = np.einsum("mi,mj->mij", stats.theta_bar, damp) * (tsq[:, None, None] / 16)
        radius = np.max(np.abs(np.linalg.eigvals(J)))
        assert radius < 1.0

    def test_larger_alpha_shrinks_derivatives(self):
        theta_bar = np.random.default_rng(9).uniform(0.5, 2.0, size=(2, 4))
        values = []
        for alpha in (0.4, 0.8):
            e, t, _, _ = solve_fixed_point(theta_bar, alpha, 8)
            e_prime, _ = derivative_terms(e, t, theta_bar, L=8)
            values.append(e_prime)
        assert np.all(values[1] < values[0])


class TestPsiUpsilon:
    def test_positive_and_single_cluster_has_no_leakage(self):
        theta_bar = np.array([[1.5]])
        e, t, _, _ = solve_fixed_point(theta_bar, 0.9, 4)
        e_prime, e_dir = derivative_terms(e, t, theta_bar, L=4)
        psi, upsilon = psi_and_upsilon(e, e_prime, e_dir, np.array([0.3]), 4)
        assert psi[0, 0] > 0
        assert upsilon[0, 0] == 0.0

    def test_symmetric_drop_has_equal_leakage(self):
        theta_bar = np.full((2, 5), 1.7)
        e, t, _, _ = solve_fixed_point(theta_bar, 0.6, 10)
        e_prime, e_dir = derivative_terms(e, t, theta_bar, L=10)
        psi, upsilon = psi_and_upsilon(e, e_prime, e_dir, np.full(5, 0.2), 10)
        np.testing.assert_allclose(upsilon, upsilon[0, 0], rtol=1e-10)

    def test_scalar_collapse_identity(self):
        # with scalar covariances the leakage kernel reduces to
        # theta_bar * (total power of the other clusters); derived by
        # substituting the scaled directional solutions into the defining sum
        rng = np.random.default_rng(10)
        theta_bar = rng.uniform(0.5, 4.0, size=(3, 6))
        p_n = rng.uniform(0.05, 0.4, size=6)
        e, t, _, _ = solve_fixed_point(theta_bar, 0.8, 12)
        e_prime, e_dir = derivative_terms(e, t, theta_bar, L=12)
        _, upsilon = psi_and_upsilon(e, e_prime, e_dir, p_n, 12)
        expected = theta_bar * (p_n.sum() - p_n)[None, :]
        np.testing.assert_allclose(upsilon, expected, rtol=1e-9)


class TestDenseReference:
    def test_scalar_path_matches_dense_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            N = int(rng.integers(1, 6))
            L = int(rng.integers(N + 1, 17))
            theta_bar = rng.uniform(0.2, 5.0, size=(1, N))
            alpha = float(rng.uniform(0.2, 2.0))
            p_n = rng.uniform(0.1, 1.0, size=N)
            state = detequiv.solve(theta_bar, alpha, L, p_n)
            ref = dense_reference(theta_bar[0], alpha, L, p_n)
            np.testing.assert_allclose(state.e[0], ref["e"], rtol=1e-10)
            np.testing.assert_allclose(state.e_prime[0], ref["e_prime"], rtol=1e-10)
            np.testing.assert_allclose(state.psi_o[0], ref["psi_o"], rtol=1e-10)
            np.testing.assert_allclose(state.upsilon[0], ref["upsilon"], rtol=1e-10)

    def test_derivative_resolvent_route_agrees(self):
        # the dense reference recomputes e' through the derivative resolvent;
        # both routes must coincide
        ref = dense_reference(np.array([0.8, 1.9, 3.1]), 0.8, 9,
                              np.array([0.2, 0.2, 0.2]))
        np.testing.assert_allclose(ref["e_prime"], ref["e_prime_from_resolvent"],
                                   rtol=1e-9)


class TestMrzfSinr:
    def stats_for(self, c, a, shape):
        return EstimationStats(c=np.full(shape, c), a=np.full(shape, a),
                               theta=np.full(shape, 0.1),
                               theta_bar=np.ones(shape[:2]))

    def test_single_cluster_single_user(self):
        theta_bar = np.array([[2.0], [1.1]])
        state = detequiv.solve(theta_bar, 0.8, 8, np.array([0.5]))
        stats = self.stats_for(0.6, 0.2, (2, 1, 1))
        power = make_power([[0.5]])
        gamma = detequiv.sinr_mrzf_noma(state, stats, power, rho=0.1)
        weight = state.e / ((1.0 + state.e) * np.sqrt(state.psi_o))
        coherent = (0.6 * weight).sum() ** 2
        assert gamma[0, 0] == pytest.approx(0.5 * coherent / 1.0, rel=1e-12)

    def test_perfect_sic_first_user_sees_no_intra_term(self):
        cfg = SystemConfig(antennas_per_ap=16)
        drop = generate_drop(cfg, 21)
        stats = estimation_stats(drop, cfg)
        N = cfg.num_clusters
        state = detequiv.solve(stats.theta_bar, cfg.rzf_alpha, 16,
                               np.full(N, cfg.total_ap_power / N))
        power = make_power(np.tile([0.006, 0.014], (N, 1)))
        g_perfect = detequiv.sinr_mrzf_noma(state, stats, power, rho=1.0)
        weight = state.e / ((1.0 + state.e) * np.sqrt(state.psi_o))
        coherent = (stats.c * weight[:, :, None]).sum(axis=0) ** 2
        kernel = (stats.c ** 2 / (1.0 + state.e[:, :, None]) ** 2 + stats.a ** 2)
        leak = (state.upsilon[:, :, None] * kernel).sum(axis=0)
        expected = power.p_nk[:, 0] * coherent[:, 0] / (leak[:, 0] + 1.0)
        np.testing.assert_allclose(g_perfect[:, 0], expected, rtol=1e-12)
