"""Scenario configuration, network geometry, and large-scale fading.

Large-scale coefficients are stored noise-normalized (linear channel gain
divided by the receiver noise power), so every SINR expression downstream
carries an additive noise term of exactly one.
"""

from dataclasses import dataclass, fields, replace
import hashlib

import numpy as np

from .errors import ConfigError
from .seeding import derive_rng

BOLTZMANN = 1.380649e-23  # J/K

NOMA = "noma"
OMA = "oma"
SCHEMES = (NOMA, OMA)


def noise_variance(bandwidth: float, noise_figure: float) -> float:
    """Receiver noise power in watts at a 290 K reference temperature.

    ``bandwidth`` in Hz, ``noise_figure`` in dB.
    """
    if bandwidth <= 0:
        raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
    return 290.0 * BOLTZMANN * bandwidth * 10.0 ** (noise_figure / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters.

    Powers are in watts (20 dBm pilot, 23 dBm per-AP budget by default) and are
    combined with noise-normalized channel gains, so products like
    ``pilot_power * beta`` are already relative to the noise floor.
    """

    num_aps: int = 25              # M
    antennas_per_ap: int = 8       # L
    num_clusters: int = 10         # N
    users_per_cluster: int = 2     # K
    coherence_interval: int = 56   # symbols
    pilot_power: float = 0.1       # W
    total_ap_power: float = 0.19952623149688797  # W
    sic_correlation: float = 0.1   # correlation of a symbol with its estimate
    rzf_alpha: float = 0.8
    power_split: tuple = None      # per-cluster fractions, ascending
    area_side: float = 1000.0      # m
    d_0: float = 10.0              # m
    d_1: float = 50.0              # m
    carrier: float = 1900.0        # MHz
    h_ap: float = 65.0             # m
    h_u: float = 15.0              # m
    shadow_std: float = 8.0        # dB
    cluster_radius: float = 50.0   # m
    bandwidth: float = 20e6        # Hz
    noise_figure: float = 9.0      # dB
    scheme: str = NOMA

    def __post_init__(self):
        if self.power_split is None:
            if self.users_per_cluster == 1:
                object.__setattr__(self, "power_split", (1.0,))
            elif self.users_per_cluster == 2:
                object.__setattr__(self, "power_split", (0.3, 0.7))
            else:
                raise ConfigError(
                    "power_split must be given explicitly for K = "
                    f"{self.users_per_cluster}"
                )
        object.__setattr__(self, "power_split", tuple(float(s) for s in self.power_split))
        self._validate()

    def _validate(self):
        M, L, N, K = (self.num_aps, self.antennas_per_ap,
                      self.num_clusters, self.users_per_cluster)
        if min(M, L, N, K) < 1:
            raise ConfigError("num_aps, antennas_per_ap, num_clusters and "
                              "users_per_cluster must all be at least 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == NOMA and K < 2:
            raise ConfigError("the non-orthogonal scheme needs at least 2 users "
                              "per cluster; model orthogonal access with K = 1")
        if self.coherence_interval < 1:
            raise ConfigError("coherence_interval must be positive")
        if self.pilot_length > self.coherence_interval:
            raise ConfigError(
                f"pilot length {self.pilot_length} exceeds the coherence "
                f"interval {self.coherence_interval}"
            )
        if self.pilot_power < 0 or self.total_ap_power < 0:
            raise ConfigError("transmit powers must be non-negative")
        split = np.asarray(self.power_split)
        if split.size != K:
            raise ConfigError(f"power_split needs {K} entries, got {split.size}")
        if np.any(split < 0) or abs(split.sum() - 1.0) > 1e-12:
            raise ConfigError("power_split entries must be non-negative and sum to 1")
        if np.any(np.diff(split) < 0):
            raise ConfigError("power_split must be ascending (weaker users get "
                              "larger shares)")
        if not 0.0 <= self.sic_correlation <= 1.0:
            raise ConfigError("sic_correlation must lie in [0, 1]")
        if self.rzf_alpha <= 0:
            raise ConfigError("rzf_alpha must be positive")
        if not 0 < self.d_0 < self.d_1 < self.area_side:
            raise ConfigError("breakpoints must satisfy 0 < d_0 < d_1 < area_side")
        if self.cluster_radius <= 0 or self.shadow_std < 0:
            raise ConfigError("cluster_radius must be positive, shadow_std >= 0")
        noise_variance(self.bandwidth, self.noise_figure)  # checks bandwidth > 0

    @property
    def pilot_length(self) -> int:
        """Pilot sequence length: one pilot per cluster, or per user when every
        user gets an orthogonal pilot."""
        if self.scheme == NOMA:
            return self.num_clusters
        return self.num_clusters * self.users_per_cluster

    @property
    def prelog(self) -> float:
        tau_c = self.coherence_interval
        return (tau_c - self.pilot_length) / tau_c

    @property
    def noise_power(self) -> float:
        return noise_variance(self.bandwidth, self.noise_figure)

    @property
    def num_users(self) -> int:
        return self.num_clusters * self.users_per_cluster

    def oma_equivalent(self) -> "SystemConfig":
        """Same population served with one orthogonal pilot per user, i.e.
        singleton clusters.  Raises ConfigError when the pilots no longer fit
        into the coherence interval."""
        return replace(
            self,
            num_clusters=self.num_users,
            users_per_cluster=1,
            power_split=(1.0,),
            scheme=OMA,
        )


def attenuation_constant_db(cfg: SystemConfig) -> float:
    """Fixed attenuation term of the three-slope path-loss model in dB."""
    f = cfg.carrier  # MHz
    return (46.3 + 33.9 * np.log10(f) - 13.82 * np.log10(cfg.h_ap)
            - (1.1 * np.log10(f) - 0.7) * cfg.h_u
            + (1.56 * np.log10(f) - 0.8))


def path_loss_db(d, cfg: SystemConfig):
    """Three-slope path loss in dB for AP-user distances ``d`` in meters.

    Exponent 3.5 beyond ``d_1``, 2 between the breakpoints, flat below
    ``d_0``; continuous at both breakpoints.  The underlying urban propagation
    model is calibrated for distances in km, so inputs are converted before
    the log terms are evaluated; this is what keeps link budgets at the
    scale the scenario assumes.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    const = attenuation_constant_db(cfg)
    d_km = d / 1000.0
    d0_km = cfg.d_0 / 1000.0
    d1_km = cfg.d_1 / 1000.0
    far = -const - 35.0 * np.log10(d_km)
    mid = -const - 15.0 * np.log10(d1_km) - 20.0 * np.log10(d_km)
    near = -const - 15.0 * np.log10(d1_km) - 20.0 * np.log10(d0_km)
    out = np.where(d > cfg.d_1, far, np.where(d > cfg.d_0, mid, near))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NetworkDrop:
    """One realization of the network geometry and large-scale fading."""

    ap_positions: np.ndarray     # (M, 2) m
    cluster_centers: np.ndarray  # (N, 2) m
    user_positions: np.ndarray   # (N, K, 2) m
    beta: np.ndarray             # (M, N, K), noise-normalized linear gain
    master_seed: int

    def __post_init__(self):
        for arr in (self.ap_positions, self.cluster_centers,
                    self.user_positions, self.beta):
            arr.flags.writeable = False

    @property
    def shape(self):
        return self.beta.shape

    def distances(self) -> np.ndarray:
        """AP-user distances in meters, clamped below at 1 m, shape (M, N, K)."""
        delta = (self.ap_positions[:, None, None, :]
                 - self.user_positions[None, :, :, :])
        return np.maximum(np.linalg.norm(delta, axis=-1), 1.0)

    def oma_view(self) -> "NetworkDrop":
        """The same geometry re-indexed as singleton clusters (one pilot per
        user)."""
        M, N, K = self.beta.shape
        return NetworkDrop(
            ap_positions=self.ap_positions.copy(),
            cluster_centers=self.user_positions.reshape(N * K, 2).copy(),
            user_positions=self.user_positions.reshape(N * K, 1, 2).copy(),
            beta=self.beta.reshape(M, N * K, 1).copy(),
            master_seed=self.master_seed,
        )


def beta_from_distances(cfg: SystemConfig, dist, z_db) -> np.ndarray:
    """Noise-normalized large-scale gains for given distances (m) and raw
    shadowing draws (dB); shadowing is suppressed on the near slopes."""
    dist = np.maximum(np.asarray(dist, dtype=float), 1.0)  # avoids log(0)
    pl = path_loss_db(dist, cfg)
    z = np.where(dist > cfg.d_1, z_db, 0.0)
    return 10.0 ** ((pl + z) / 10.0) / cfg.noise_power


def generate_drop(cfg: SystemConfig, seed: int) -> NetworkDrop:
    """Draw AP/cluster/user positions and the large-scale gain tensor.

    APs and cluster centers are uniform i.i.d. over the square; users are
    uniform in a disc of ``cluster_radius`` around their center, clipped to
    the square.  Log-normal shadowing applies only beyond ``d_1``.  A pure
    function of (cfg, seed).
    """
    M, N, K = cfg.num_aps, cfg.num_clusters, cfg.users_per_cluster
    D = cfg.area_side

    geo = derive_rng(seed, "geometry")
    ap = geo.uniform(0.0, D, size=(M, 2))
    centers = geo.uniform(0.0, D, size=(N, 2))
    radius = cfg.cluster_radius * np.sqrt(geo.uniform(size=(N, K)))
    angle = geo.uniform(0.0, 2.0 * np.pi, size=(N, K))
    offsets = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    users = np.clip(centers[:, None, :] + offsets, 0.0, D)

    delta = ap[:, None, None, :] - users[None, :, :, :]
    dist = np.maximum(np.linalg.norm(delta, axis=-1), 1.0)

    sh = derive_rng(seed, "shadowing")
    z = sh.normal(0.0, cfg.shadow_std, size=dist.shape)

    beta = beta_from_distances(cfg, dist, z)
    return NetworkDrop(ap_positions=ap, cluster_centers=centers,
                       user_positions=users, beta=beta, master_seed=int(seed))


# --- plain-text config files -------------------------------------------------

_CONFIG_FIELDS = {f.name: f for f in fields(SystemConfig)}


def _parse_value(name: str, text: str):
    kind = _CONFIG_FIELDS[name].type
    text = text.strip()
    if name == "power_split":
        return tuple(float(part) for part in text.strip("()[] ").split(",") if part.strip())
    if name == "scheme":
        return text.lower()
    if kind in (int, "int"):
        return int(text)
    return float(text)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into a dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, val)
    return values


def load_config(path=None, overrides: dict | None = None) -> SystemConfig:
    """Build a SystemConfig from an optional file plus override values."""
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key, val in (overrides or {}).items():
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, val) if isinstance(val, str) else val
    return SystemConfig(**values)


def dump_config(cfg: SystemConfig) -> str:
    lines = []
    for name in _CONFIG_FIELDS:
        val = getattr(cfg, name)
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: SystemConfig) -> str:
    """Short stable digest of every configuration field."""
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:12]
