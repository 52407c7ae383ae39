"""Empirical SINR and ergodic-rate estimation.

This is the oracle route: every expectation in the hardening-based SINR is
replaced by a sample mean over independent channel/pilot-noise realizations.
Symbol-level randomness of the cancellation residual is integrated
analytically (E|eta s - E{eta} s_hat|^2 = E|eta|^2 + (1 - 2 rho) |E{eta}|^2),
so only channel randomness is sampled.

Each trial draws from generators keyed by (seed, purpose, trial index), so any
partition of trials across batches or workers reproduces identical samples.
"""

from dataclasses import dataclass

import numpy as np

from . import detequiv
from .errors import DegenerateSamples
from .estimation import (draw_small_scale, estimation_stats, pilot_observation)
from .noma import allocate_power, apply_ordering, order_users, reorder
from .precoding import fpzf, mrt, mrzf
from .rates import RateReport, assemble_report
from .scenario import NetworkDrop, SystemConfig


@dataclass(frozen=True)
class EffectiveGainSamples:
    """Per-trial effective gains eta[t, n, k, n'] = sum_m h[m,n,k]^H w[m,n']."""

    eta: np.ndarray          # (T, N, K, N) complex
    trial_seeds: tuple       # (master_seed, trial_index) pairs

    @property
    def trials(self) -> int:
        return self.eta.shape[0]


def _precoder_for_trial(hbar, stats, precoder, cfg, psi):
    if precoder == "mrt":
        return mrt(hbar, stats.theta_bar)
    if precoder == "fpzf":
        return fpzf(hbar, stats.theta_bar)
    if precoder == "mrzf":
        return mrzf(hbar, cfg.rzf_alpha, psi)
    raise ValueError(f"unknown precoder {precoder!r}")


def collect_gains(cfg: SystemConfig, drop: NetworkDrop, precoder: str,
                  trials: int, seed: int, psi: np.ndarray | None = None,
                  normalization: str = "det-equiv") -> EffectiveGainSamples:
    """Simulate ``trials`` independent pilot+data slots and record the
    effective gains of every user against every cluster's beam.

    For the regularized precoder the squared-norm scaling defaults to its
    deterministic equivalent; ``normalization="empirical"`` instead rescales
    by the batch average of the unnormalized norms (validation mode).
    """
    stats = estimation_stats(drop, cfg)
    M, N, K = drop.beta.shape

    if precoder == "mrzf":
        if normalization == "empirical":
            psi = _empirical_norms(cfg, drop, trials, seed)
        elif psi is None:
            state = detequiv.solve(stats.theta_bar, cfg.rzf_alpha,
                                   cfg.antennas_per_ap,
                                   np.full(N, cfg.total_ap_power / N))
            psi = state.psi_o

    eta = np.empty((trials, N, K, N), dtype=complex)
    for t in range(trials):
        chan = draw_small_scale(drop, cfg, seed, t)
        chan = pilot_observation(chan, cfg, seed, t)
        w = _precoder_for_trial(chan.hbar, stats, precoder, cfg, psi)
        L = chan.h.shape[-1]
        prod = np.conj(chan.h).reshape(M, N * K, L) @ np.swapaxes(w, -2, -1)
        eta[t] = prod.sum(axis=0).reshape(N, K, N)
    trial_seeds = tuple((int(seed), t) for t in range(trials))
    return EffectiveGainSamples(eta=eta, trial_seeds=trial_seeds)


def _empirical_norms(cfg, drop, trials, seed):
    """Batch-averaged squared norms of the unnormalized regularized directions."""
    M, N, _ = drop.beta.shape
    acc = np.zeros((M, N))
    for t in range(trials):
        chan = draw_small_scale(drop, cfg, seed, t)
        chan = pilot_observation(chan, cfg, seed, t)
        dirs = mrzf(chan.hbar, cfg.rzf_alpha, np.ones((M, N)))
        acc += (np.abs(dirs) ** 2).sum(axis=-1)
    return acc / trials


def empirical_sinr(samples: EffectiveGainSamples, power, rho) -> np.ndarray:
    """Estimate the hardening SINR from effective-gain samples.

    Sample means replace the desired-signal mean, the per-beam second moments,
    and the cancellation residual (through the analytic symbol identity).
    """
    if samples.trials < 2:
        raise ValueError("need at least 2 trials to estimate an SINR")
    eta = samples.eta
    T, N, K, _ = eta.shape
    if not np.any(eta):
        raise DegenerateSamples("all effective-gain samples are zero")

    mean_eta = eta.mean(axis=0)                       # (N, K, N)
    second = (np.abs(eta) ** 2).mean(axis=0)          # (N, K, N)
    own = np.arange(N)
    own_mean_sq = np.abs(mean_eta[own, :, own]) ** 2  # (N, K)
    own_second = second[own, :, own]                  # (N, K)

    p_nk = power.p_nk
    rho_nk = np.broadcast_to(np.asarray(rho, dtype=float), (N, K))
    bu_var = np.maximum(own_second - own_mean_sq, 0.0)

    cross = second.copy()
    cross[own, :, own] = 0.0                          # own beam handled above
    inter = np.einsum("j,nkj->nk", power.p_n, cross)

    gamma = np.empty((N, K))
    for k in range(K):
        before = (p_nk[:, :k] * own_second[:, k:k + 1]).sum(axis=1)
        resid = (p_nk[:, k + 1:] * (own_second[:, k:k + 1]
                 + (1.0 - 2.0 * rho_nk[:, k + 1:]) * own_mean_sq[:, k:k + 1])).sum(axis=1)
        den = p_nk[:, k] * bu_var[:, k] + before + resid + inter[:, k] + 1.0
        gamma[:, k] = p_nk[:, k] * own_mean_sq[:, k] / den
    return gamma


def ergodic_sum_rate(cfg: SystemConfig, drop: NetworkDrop, precoder: str,
                     trials: int, seed: int, sic: str = "imperfect",
                     normalization: str = "det-equiv") -> RateReport:
    """Monte Carlo ergodic rates with the same ordering and power rules as the
    closed forms."""
    stats = estimation_stats(drop, cfg)
    N = drop.beta.shape[1]
    state = None
    if precoder == "mrzf":
        state = detequiv.solve(stats.theta_bar, cfg.rzf_alpha, cfg.antennas_per_ap,
                               np.full(N, cfg.total_ap_power / N))
    ordering = order_users(stats, precoder, state)
    power = allocate_power(cfg, ordering)
    rho = 1.0 if sic == "perfect" else cfg.sic_correlation

    psi = state.psi_o if state is not None else None
    samples = collect_gains(cfg, drop, precoder, trials, seed, psi=psi,
                            normalization=normalization)
    eta_ordered = np.take_along_axis(samples.eta, ordering[None, :, :, None], axis=2)
    gamma = empirical_sinr(
        EffectiveGainSamples(eta=eta_ordered, trial_seeds=samples.trial_seeds),
        power, rho)
    return assemble_report(gamma, cfg, source="monte-carlo",
                           precoder=precoder, sic=sic)
