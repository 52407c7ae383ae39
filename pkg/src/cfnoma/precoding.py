"""Per-AP precoder construction from local pilot observations.

Every precoder here is a function of one AP's own observations and statistics
(the arrays are batched over APs for convenience, never mixed across them),
and is scaled to unit expected squared norm.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PrecoderInfeasible
from .estimation import EstimationStats
from .scenario import SystemConfig

NORMALIZATIONS = ("analytic", "det-equiv", "empirical")


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-expected-norm beamforming vectors, one per (AP, cluster)."""

    w: np.ndarray             # (M, N, L)
    scheme: str               # mrt | fpzf | mrzf
    normalization_mode: str


def mrt(hbar: np.ndarray, theta_bar: np.ndarray) -> np.ndarray:
    """Conjugate of the projected observation, scaled by its analytic mean
    squared norm L * theta_bar."""
    L = hbar.shape[-1]
    return hbar / np.sqrt(L * theta_bar)[..., None]


def fpzf(hbar: np.ndarray, theta_bar: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of the stacked observations, one column per cluster.

    The Gram system is solved after column equilibration and with one step of
    iterative refinement so the per-realization nulling of other clusters'
    estimates holds to machine precision even when the noise-normalized
    column scales differ by many orders of magnitude.
    """
    n_col, L = hbar.shape[-2:]
    if L < n_col + 1:
        raise PrecoderInfeasible(f"pseudo-inverse precoding needs L >= N + 1, "
                                 f"got L={L}, N={n_col}")
    H = np.swapaxes(hbar, -2, -1)                       # (..., L, N)
    colscale = np.linalg.norm(hbar, axis=-1)            # (..., N)
    Hs = H / colscale[..., None, :]
    gram = np.swapaxes(Hs, -2, -1).conj() @ Hs          # (..., N, N)
    eye = np.broadcast_to(np.eye(n_col), gram.shape)
    inv = np.linalg.solve(gram, eye)
    inv = inv + np.linalg.solve(gram, eye - gram @ inv)  # refinement step
    dirs = Hs @ inv                                      # (..., L, N)
    dirs = dirs / colscale[..., None, :]
    scale = np.sqrt((L - n_col) * theta_bar)             # (..., N)
    return np.swapaxes(dirs * scale[..., None, :], -2, -1)


def mrzf(hbar: np.ndarray, alpha: float, psi: np.ndarray) -> np.ndarray:
    """Regularized inverse of the local observation Gram applied to each
    column, scaled by the supplied squared-norm estimates ``psi``."""
    if alpha <= 0:
        raise ValueError("regularization must be positive")
    L = hbar.shape[-1]
    H = np.swapaxes(hbar, -2, -1)                       # (..., L, N)
    A = H @ np.conj(hbar) + (L * alpha) * np.eye(L)     # sum of column outer products
    dirs = np.linalg.solve(A, H)                        # (..., L, N)
    return np.swapaxes(dirs / np.sqrt(psi)[..., None, :], -2, -1)


def build(hbar: np.ndarray, stats: EstimationStats, precoder: str,
          cfg: SystemConfig, psi: np.ndarray | None = None) -> PrecoderSet:
    """Assemble the per-AP precoder set for one channel realization."""
    if precoder == "mrt":
        return PrecoderSet(mrt(hbar, stats.theta_bar), "mrt", "analytic")
    if precoder == "fpzf":
        return PrecoderSet(fpzf(hbar, stats.theta_bar), "fpzf", "analytic")
    if precoder == "mrzf":
        if psi is None:
            raise ValueError("mrzf needs squared-norm estimates psi")
        return PrecoderSet(mrzf(hbar, cfg.rzf_alpha, psi), "mrzf", "det-equiv")
    raise ValueError(f"unknown precoder {precoder!r}")
