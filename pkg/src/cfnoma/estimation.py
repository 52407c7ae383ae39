"""Uplink pilot simulation and per-AP MMSE channel estimation.

Cluster pilots are exactly orthonormal, so pilot projection is carried out
analytically: the per-cluster observation equals sqrt(tau * p_p) times the sum
of the cluster's channels plus unit-variance complex Gaussian noise, without
ever materializing the pilot matrix.  Orthonormal projections of white noise
are independent across clusters, which is why each projected column may draw
its own noise vector.
"""

from dataclasses import dataclass, replace

import numpy as np

from .scenario import NetworkDrop, SystemConfig
from .seeding import derive_rng


@dataclass(frozen=True)
class EstimationStats:
    """Closed-form second-order statistics of the MMSE channel estimates."""

    c: np.ndarray          # (M, N, K) MMSE gain
    theta: np.ndarray      # (M, N, K) per-antenna estimate variance
    a: np.ndarray          # (M, N, K) error-direction gain
    theta_bar: np.ndarray  # (M, N) per-antenna variance of a projected column

    @property
    def shape(self):
        return self.c.shape

    @property
    def beta(self) -> np.ndarray:
        """Large-scale gains recovered from the identity a^2*theta_bar = beta - theta."""
        return self.theta + self.a ** 2 * self.theta_bar[:, :, None]


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale channels and (optionally) their pilot-based estimates."""

    h: np.ndarray                 # (M, N, K, L)
    hbar: np.ndarray = None       # (M, N, L) projected pilot observations
    hhat: np.ndarray = None       # (M, N, K, L) MMSE estimates
    eps: np.ndarray = None        # (M, N, K, L) estimation errors


def estimation_stats(drop: NetworkDrop, cfg: SystemConfig) -> EstimationStats:
    """Per-(AP, cluster, user) estimation statistics from large-scale gains."""
    tau_pp = cfg.pilot_length * cfg.pilot_power
    beta = drop.beta
    theta_bar = 1.0 + tau_pp * beta.sum(axis=2)
    c = np.sqrt(tau_pp) * beta / theta_bar[:, :, None]
    theta = np.sqrt(tau_pp) * beta * c
    a = np.sqrt((beta - theta) / theta_bar[:, :, None])
    return EstimationStats(c=c, theta=theta, a=a, theta_bar=theta_bar)


def complex_normal(rng: np.random.Generator, shape, scale=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with std ``scale`` per entry."""
    z = rng.standard_normal(size=(*shape, 2)).view(np.complex128)[..., 0]
    return z * (scale / np.sqrt(2.0))


def draw_small_scale(drop: NetworkDrop, cfg: SystemConfig, seed: int,
                     trial: int = 0) -> ChannelRealization:
    """Rayleigh channels h[m,n,k] ~ CN(0, beta[m,n,k] I_L), deterministic in
    (seed, trial)."""
    rng = derive_rng(seed, "small-scale", trial)
    L = cfg.antennas_per_ap
    scale = np.sqrt(drop.beta)[..., None]
    h = complex_normal(rng, (*drop.beta.shape, L), scale)
    return ChannelRealization(h=h)


def pilot_observation(chan: ChannelRealization, cfg: SystemConfig, seed: int,
                      trial: int = 0, noise: bool = True) -> ChannelRealization:
    """Project the received pilot block onto each cluster pilot.

    ``noise=False`` is a test hook that suppresses the additive receiver
    noise.
    """
    tau_pp = cfg.pilot_length * cfg.pilot_power
    hbar = np.sqrt(tau_pp) * chan.h.sum(axis=2)
    if noise:
        rng = derive_rng(seed, "pilot-noise", trial)
        hbar = hbar + complex_normal(rng, hbar.shape)
    return replace(chan, hbar=hbar)


def mmse_estimate(chan: ChannelRealization, stats: EstimationStats) -> ChannelRealization:
    """Scale each projected column by the MMSE gain; estimates of co-cluster
    users are parallel by construction."""
    if chan.hbar is None:
        raise ValueError("pilot observation missing; call pilot_observation first")
    if chan.hbar.shape[:2] != stats.theta_bar.shape:
        raise ValueError(f"shape mismatch: observations {chan.hbar.shape[:2]} "
                         f"vs stats {stats.theta_bar.shape}")
    hhat = stats.c[..., None] * chan.hbar[:, :, None, :]
    return replace(chan, hhat=hhat, eps=chan.h - hhat)


def realize(drop: NetworkDrop, cfg: SystemConfig, stats: EstimationStats,
            seed: int, trial: int = 0) -> ChannelRealization:
    """Draw channels, simulate pilots, and estimate, in one step."""
    chan = draw_small_scale(drop, cfg, seed, trial)
    chan = pilot_observation(chan, cfg, seed, trial)
    return mmse_estimate(chan, stats)
