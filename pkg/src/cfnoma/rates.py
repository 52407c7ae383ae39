"""Closed-form SINR expressions and achievable-rate reports.

All formulas below assume users are already ordered within their cluster
(descending mean effective gain) and powers assigned ascending, and that the
large-scale gains are noise-normalized so the additive noise term is 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PrecoderInfeasible, PrelogInfeasible
from .estimation import EstimationStats
from .noma import PowerAllocation
from .scenario import SystemConfig


@dataclass(frozen=True)
class RateReport:
    """Per-user SINR/rate plus cluster and network totals."""

    gamma: np.ndarray        # (N, K) linear SINR
    rate: np.ndarray         # (N, K) bits/s/Hz
    per_cluster: np.ndarray  # (N,)
    sum_rate: float          # bits/s/Hz, finite entries only
    prelog: float
    source: str              # closed-form | monte-carlo | det-equiv
    scheme: str
    precoder: str
    sic: str


def sic_interference_weights(p_nk: np.ndarray, rho) -> np.ndarray:
    """Per-(cluster, user) intra-cluster weight: full power of the
    lower-ordered users plus the cancellation residual (2 - 2*rho) of the
    higher-ordered ones."""
    N, K = p_nk.shape
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (N, K))
    out = np.zeros((N, K))
    for k in range(K):
        out[:, k] = (p_nk[:, :k].sum(axis=1)
                     + (p_nk[:, k + 1:] * (2.0 - 2.0 * rho[:, k + 1:])).sum(axis=1))
    return out


def sinr_mrt_noma(stats: EstimationStats, power: PowerAllocation, rho, L: int) -> np.ndarray:
    """Conjugate-beamforming SINR with shared-pilot clusters and imperfect
    cancellation."""
    p_nk = power.p_nk
    gain = np.sqrt(stats.theta).sum(axis=0) ** 2          # (N, K)
    intra = sic_interference_weights(p_nk, rho)
    leak = power.total * stats.beta.sum(axis=0)           # all clusters, own included
    return L * p_nk * gain / (L * gain * intra + leak + 1.0)


def sinr_fpzf_noma(stats: EstimationStats, power: PowerAllocation, rho, L: int) -> np.ndarray:
    """Full-pilot zero-forcing SINR: array gain L - N, inter-cluster leakage
    only through the estimation error."""
    N = stats.shape[1]
    if L < N + 1:
        raise PrecoderInfeasible(f"pseudo-inverse precoding needs L >= N + 1, "
                                 f"got L={L}, N={N}")
    p_nk = power.p_nk
    gain = np.sqrt(stats.theta).sum(axis=0) ** 2
    intra = sic_interference_weights(p_nk, rho)
    leak = power.total * (stats.beta - stats.theta).sum(axis=0)
    return (L - N) * p_nk * gain / ((L - N) * gain * intra + leak + 1.0)


def sinr_oma(stats: EstimationStats, power: PowerAllocation, L: int,
             precoder: str) -> np.ndarray:
    """SINR with one orthogonal pilot per user (singleton clusters): no pilot
    sharing, no cancellation, interference from the estimation error (zero
    forcing) or the full channel (conjugate beamforming)."""
    n_pilots = stats.shape[1]
    p_nk = power.p_nk
    gain = np.sqrt(stats.theta).sum(axis=0) ** 2
    if precoder == "mrt":
        return L * p_nk * gain / (power.total * stats.beta.sum(axis=0) + 1.0)
    if precoder == "fpzf":
        if L < n_pilots + 1:
            raise PrecoderInfeasible(f"pseudo-inverse precoding needs L >= "
                                     f"{n_pilots + 1} antennas, got {L}")
        leak = power.total * (stats.beta - stats.theta).sum(axis=0)
        return (L - n_pilots) * p_nk * gain / (leak + 1.0)
    raise ValueError(f"no orthogonal-access closed form for precoder {precoder!r}")


def sinr_limit_large_l(power: PowerAllocation, rho) -> np.ndarray:
    """Antenna-count limit of the shared-pilot SINR.

    Depends only on the power split and the cancellation quality; +inf is a
    documented sentinel for users with an empty interference set (top-ordered
    user under perfect cancellation).
    """
    intra = sic_interference_weights(power.p_nk, rho)
    with np.errstate(divide="ignore"):
        return np.where(intra > 0.0, power.p_nk / np.where(intra > 0, intra, 1.0), np.inf)


def assemble_report(gamma: np.ndarray, cfg: SystemConfig, *, source: str,
                    precoder: str, sic: str, rate_cap: float | None = None) -> RateReport:
    """Apply the pilot-overhead pre-log factor and aggregate.

    Infinite SINRs produce infinite per-user rates (or ``rate_cap`` when
    given); non-finite rates are excluded from the cluster and network sums.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR values must be non-negative")
    zeta = cfg.prelog
    if zeta <= 0:
        raise PrelogInfeasible(
            f"pilot length {cfg.pilot_length} leaves no data symbols in a "
            f"coherence interval of {cfg.coherence_interval}"
        )
    rate = zeta * np.log2(1.0 + gamma)
    if rate_cap is not None:
        rate = np.minimum(rate, rate_cap)
    finite = np.where(np.isfinite(rate), rate, 0.0)
    per_cluster = finite.sum(axis=1)
    return RateReport(
        gamma=gamma, rate=rate, per_cluster=per_cluster,
        sum_rate=float(finite.sum()), prelog=float(zeta),
        source=source, scheme=cfg.scheme, precoder=precoder, sic=sic,
    )
