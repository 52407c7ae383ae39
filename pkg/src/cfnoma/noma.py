"""User ordering and power allocation for power-domain multiple access.

Ordering uses closed-form mean effective channel gains (pure functions of the
estimation statistics), never per-realization channels: the central unit only
ever sees slowly varying statistics.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .estimation import EstimationStats
from .scenario import SystemConfig

PRECODERS = ("mrt", "fpzf", "mrzf")


@dataclass(frozen=True)
class PowerAllocation:
    """Transmit powers per (cluster, ordered user)."""

    lambda_nk: np.ndarray  # (N, K) fractions of the per-AP budget
    p_nk: np.ndarray       # (N, K) W, ascending within each cluster
    p_n: np.ndarray        # (N,) W per-cluster totals
    ordering: np.ndarray   # (N, K) original user index per ordered slot

    @property
    def total(self) -> float:
        return float(self.p_nk.sum())


def ordering_metric(stats: EstimationStats, precoder: str, det_state=None) -> np.ndarray:
    """Mean effective channel gain proxy per (cluster, user); monotone in the
    actual mean gain for each supported precoder."""
    if precoder in ("mrt", "fpzf"):
        return np.sqrt(stats.theta).sum(axis=0)
    if precoder == "mrzf":
        if det_state is None:
            raise ValueError("mrzf ordering needs the deterministic-equivalent state")
        e, psi = det_state.e, det_state.psi_o
        weight = e / ((1.0 + e) * np.sqrt(psi))
        return (stats.c * weight[:, :, None]).sum(axis=0)
    raise ValueError(f"unknown precoder {precoder!r}")


def order_users(stats: EstimationStats, precoder: str, det_state=None) -> np.ndarray:
    """Per-cluster permutation sorting users by descending mean effective
    gain; ties keep the original index order."""
    metric = ordering_metric(stats, precoder, det_state)
    return np.argsort(-metric, axis=1, kind="stable")


def reorder(tensor: np.ndarray, ordering: np.ndarray) -> np.ndarray:
    """Apply a per-cluster user permutation to the trailing user axis of an
    (M, N, K) tensor or an (N, K) matrix."""
    if tensor.ndim == 2:
        return np.take_along_axis(tensor, ordering, axis=1)
    return np.take_along_axis(tensor, ordering[None, :, :], axis=2)


def apply_ordering(stats: EstimationStats, ordering: np.ndarray) -> EstimationStats:
    return replace(
        stats,
        c=reorder(stats.c, ordering),
        theta=reorder(stats.theta, ordering),
        a=reorder(stats.a, ordering),
    )


def allocate_power(cfg: SystemConfig, ordering: np.ndarray) -> PowerAllocation:
    """Split the per-AP budget evenly over clusters, then across the ordered
    users with the configured ascending fractions (strongest user gets the
    smallest share)."""
    N, K = ordering.shape
    if N != cfg.num_clusters:
        raise ConfigError(f"ordering has {N} clusters but config has "
                          f"{cfg.num_clusters}")
    split = np.asarray(cfg.power_split, dtype=float)
    if split.size != K:
        raise ConfigError(f"power_split needs {K} entries, got {split.size}")
    if np.any(np.diff(split) < 0):
        raise ConfigError("power_split must be ascending")
    lambda_nk = np.tile(split / N, (N, 1))
    p_nk = cfg.total_ap_power * lambda_nk
    return PowerAllocation(lambda_nk=lambda_nk, p_nk=p_nk,
                           p_n=p_nk.sum(axis=1), ordering=ordering)
