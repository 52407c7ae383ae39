"""Experiment drivers behind the command-line interface.

Every driver emits long-format rows under one shared schema; aggregates are
recomputable from the raw rows, and every run writes a JSON sidecar with the
full provenance (seed, trial count, configuration hash).
"""

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from . import detequiv
from .errors import ConfigError, PrecoderInfeasible, PrelogInfeasible
from .estimation import complex_normal, estimation_stats, realize
from .montecarlo import ergodic_sum_rate
from .noma import allocate_power, apply_ordering, order_users
from .precoding import fpzf
from .rates import assemble_report, sinr_fpzf_noma, sinr_mrt_noma, sinr_oma
from .scenario import (NOMA, OMA, NetworkDrop, SystemConfig, config_hash,
                       dump_config, generate_drop)
from .seeding import derive_rng

CSV_HEADER = ["experiment", "precoder", "scheme", "sic", "M", "L", "N", "K",
              "users", "alpha", "drop", "seed", "metric", "value"]

AGGREGATE_DROP = "mean"


@dataclass
class ExperimentSpec:
    """One experiment invocation: which family, on which base scenario."""

    kind: str
    config: SystemConfig
    seed: int = 1
    drops: int = 50
    trials: int = 2000
    out: str = "results.csv"
    precoders: tuple = ("mrt",)
    schemes: tuple = (NOMA,)
    sics: tuple = ("imperfect",)
    users_axis: tuple = ()
    antennas_axis: tuple = (8, 16, 24, 32, 40)
    estimator: str = "closed-form"


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def write_rows(path: str, rows: list, spec: ExperimentSpec) -> None:
    """Write the CSV plus a sidecar with the run-level provenance."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row.get(col, "")) for col in CSV_HEADER])
    meta = {
        "kind": spec.kind,
        "seed": spec.seed,
        "drops": spec.drops,
        "trials": spec.trials,
        "config_hash": config_hash(spec.config),
        "config": dump_config(spec.config).splitlines(),
    }
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _base_row(spec, cfg, **extra):
    row = {
        "experiment": spec.kind,
        "M": cfg.num_aps, "L": cfg.antennas_per_ap,
        "N": cfg.num_clusters, "K": cfg.users_per_cluster,
        "users": cfg.num_users, "alpha": cfg.rzf_alpha,
        "seed": spec.seed,
    }
    row.update(extra)
    return row


def closed_form_report(cfg: SystemConfig, drop: NetworkDrop, precoder: str,
                       sic: str):
    """Closed-form (or deterministic-equivalent) rate report for one drop."""
    stats = estimation_stats(drop, cfg)
    L = cfg.antennas_per_ap
    N = cfg.num_clusters
    rho = 1.0 if sic == "perfect" else cfg.sic_correlation
    state = None
    if precoder == "mrzf":
        state = detequiv.solve(stats.theta_bar, cfg.rzf_alpha, L,
                               np.full(N, cfg.total_ap_power / N))
    ordering = order_users(stats, precoder, state)
    stats_o = apply_ordering(stats, ordering)
    power = allocate_power(cfg, ordering)
    if precoder == "mrzf":
        gamma = detequiv.sinr_mrzf_noma(state, stats_o, power, rho)
        source = "det-equiv"
    elif cfg.scheme == OMA:
        gamma = sinr_oma(stats_o, power, L, precoder)
        source = "closed-form"
    elif precoder == "mrt":
        gamma = sinr_mrt_noma(stats_o, power, rho, L)
        source = "closed-form"
    elif precoder == "fpzf":
        gamma = sinr_fpzf_noma(stats_o, power, rho, L)
        source = "closed-form"
    else:
        raise ValueError(f"unknown precoder {precoder!r}")
    return assemble_report(gamma, cfg, source=source, precoder=precoder, sic=sic)


def point_config(base: SystemConfig, users: int, scheme: str) -> SystemConfig:
    """Scenario for one sweep point; raises ConfigError when infeasible."""
    K = base.users_per_cluster
    if users % K:
        raise ConfigError(f"{users} users do not split into clusters of {K}")
    cfg = replace(base, num_clusters=users // K, scheme=NOMA)
    if scheme == OMA:
        cfg = cfg.oma_equivalent()
    return cfg


def default_users_axis(base: SystemConfig) -> tuple:
    K = base.users_per_cluster
    top = 2 * base.coherence_interval  # the shared-pilot scheme serves K per pilot
    step = max(K * 2, 4)
    return tuple(range(step, top + 1, step))


def sweep_users(spec: ExperimentSpec) -> list:
    """Sum rate versus the number of served users, averaged over drops."""
    rows = []
    axis = spec.users_axis or default_users_axis(spec.config)
    for users in axis:
        for scheme in spec.schemes:
            for precoder in spec.precoders:
                for sic in spec.sics:
                    rows.extend(_sweep_cell(spec, users, scheme, precoder, sic))
    return rows


def _infeasible_row(spec, users, scheme, precoder, sic):
    K = 1 if scheme == OMA else spec.config.users_per_cluster
    row = _base_row(spec, spec.config, precoder=precoder, scheme=scheme,
                    sic=sic, metric="infeasible", value="", drop="")
    row.update(users=users, K=K, N=users // K)
    return row


def _sweep_cell(spec, users, scheme, precoder, sic):
    try:
        cfg_noma = point_config(spec.config, users, NOMA)
        cfg = cfg_noma if scheme == NOMA else cfg_noma.oma_equivalent()
    except ConfigError:
        return [_infeasible_row(spec, users, scheme, precoder, sic)]

    run_closed = spec.estimator in ("closed-form", "both")
    run_mc = spec.estimator in ("monte-carlo", "both")
    rows, values, mc_values = [], [], []
    for d in range(spec.drops):
        drop = generate_drop(cfg_noma, _drop_seed(spec.seed, users, d))
        if scheme == OMA:
            drop = drop.oma_view()
        try:
            if run_closed:
                report = closed_form_report(cfg, drop, precoder, sic)
                values.append(report.sum_rate)
                rows.append(_base_row(spec, cfg, precoder=precoder,
                                      scheme=scheme, sic=sic,
                                      metric="sum_rate",
                                      value=report.sum_rate, drop=d))
            if run_mc:
                mc = ergodic_sum_rate(cfg, drop, precoder, spec.trials,
                                      _trial_seed(spec.seed, users, d), sic=sic)
                mc_values.append(mc.sum_rate)
                rows.append(_base_row(spec, cfg, experiment=spec.kind + "/mc",
                                      precoder=precoder, scheme=scheme,
                                      sic=sic, metric="sum_rate",
                                      value=mc.sum_rate, drop=d))
        except (PrecoderInfeasible, PrelogInfeasible):
            return [_infeasible_row(spec, users, scheme, precoder, sic)]
    if values:
        rows.append(_base_row(spec, cfg, precoder=precoder, scheme=scheme,
                              sic=sic, metric="sum_rate",
                              value=float(np.mean(values)),
                              drop=AGGREGATE_DROP))
    if mc_values:
        rows.append(_base_row(spec, cfg, experiment=spec.kind + "/mc",
                              precoder=precoder, scheme=scheme, sic=sic,
                              metric="sum_rate", value=float(np.mean(mc_values)),
                              drop=AGGREGATE_DROP))
    return rows


def _drop_seed(master, point, index):
    return int(derive_rng(master, f"drop/{point}", index).integers(2 ** 63))


def _trial_seed(master, point, index):
    return int(derive_rng(master, f"trials/{point}", index).integers(2 ** 63))


def cdf_cluster(spec: ExperimentSpec) -> list:
    """Per-cluster rates across drops, for empirical CDFs."""
    rows = []
    cfg = spec.config
    for d in range(spec.drops):
        drop = generate_drop(cfg, _drop_seed(spec.seed, "cdf", d))
        for precoder in spec.precoders:
            for sic in spec.sics:
                report = closed_form_report(cfg, drop, precoder, sic)
                for value in report.per_cluster:
                    rows.append(_base_row(spec, cfg, precoder=precoder,
                                          scheme=cfg.scheme, sic=sic,
                                          metric="per_cluster_rate",
                                          value=value, drop=d))
    return rows


def de_error(spec: ExperimentSpec) -> list:
    """Relative gap between the Monte Carlo ergodic sum rate and its
    deterministic equivalent, along an antenna axis with L/N fixed."""
    rows = []
    K = spec.config.users_per_cluster
    for L in spec.antennas_axis:
        if L % K:
            raise ConfigError(f"antenna count {L} is not a multiple of K={K}")
        cfg = replace(spec.config, antennas_per_ap=L, num_clusters=L // K,
                      scheme=NOMA)
        errors = []
        for d in range(spec.drops):
            drop = generate_drop(cfg, _drop_seed(spec.seed, f"de/{L}", d))
            report = closed_form_report(cfg, drop, "mrzf", spec.sics[0])
            mc = ergodic_sum_rate(cfg, drop, "mrzf", spec.trials,
                                  _trial_seed(spec.seed, f"de/{L}", d),
                                  sic=spec.sics[0])
            err = (mc.sum_rate - report.sum_rate) / mc.sum_rate
            errors.append(err)
            rows.append(_base_row(spec, cfg, precoder="mrzf",
                                  scheme=cfg.scheme, sic=spec.sics[0],
                                  metric="rel_error", value=err, drop=d))
        rows.append(_base_row(spec, cfg, precoder="mrzf", scheme=cfg.scheme,
                              sic=spec.sics[0], metric="rel_error",
                              value=float(np.mean(errors)), drop=AGGREGATE_DROP))
    return rows


# --- validation property suite -------------------------------------------------

def check_wishart_moment(seed, draws=100_000, L=8, var=0.7):
    """Fourth moment of a complex Gaussian vector: E|z^H z|^2 = (L^2+L) var^2."""
    rng = derive_rng(seed, "validate/wishart")
    z = complex_normal(rng, (draws, L), np.sqrt(var))
    measured = np.mean(np.abs(np.einsum("ti,ti->t", np.conj(z), z)) ** 2)
    expected = (L * L + L) * var ** 2
    dev = abs(measured - expected) / expected
    return dev, dev <= 0.02


def check_gram_inverse_diagonal(seed, draws=10_000, L=12, n_col=4):
    """Mean diagonal of the inverse Gram of i.i.d. columns: 1/((L - N) var)."""
    rng = derive_rng(seed, "validate/graminv")
    var = rng.uniform(0.5, 2.0, size=n_col)
    cols = complex_normal(rng, (draws, n_col, L), np.sqrt(var)[None, :, None])
    H = np.swapaxes(cols, -2, -1)
    gram = np.swapaxes(H, -2, -1).conj() @ H
    inv = np.linalg.inv(gram)
    measured = np.einsum("tnn->n", inv).real / draws
    expected = 1.0 / ((L - n_col) * var)
    dev = float(np.max(np.abs(measured - expected) / expected))
    return dev, dev <= 0.03


def check_fpzf_nulling(seed, trials=20):
    """Cross-cluster estimate leakage of the pseudo-inverse precoder."""
    cfg = SystemConfig(antennas_per_ap=16)
    drop = generate_drop(cfg, seed)
    stats = estimation_stats(drop, cfg)
    worst = 0.0
    idx = np.arange(cfg.num_clusters)
    for t in range(trials):
        chan = realize(drop, cfg, stats, seed, t)
        w = fpzf(chan.hbar, stats.theta_bar)
        dots = np.einsum("mnkl,mjl->mnkj", np.conj(chan.hhat), w)
        dots[:, idx, :, idx] = 0.0
        worst = max(worst, float(np.abs(dots).max()))
    return worst, worst <= 1e-10


def _closed_vs_mc(precoder, L, seed, trials, tol):
    cfg = SystemConfig(num_aps=10, antennas_per_ap=L, num_clusters=5)
    drop = generate_drop(cfg, seed)
    stats = estimation_stats(drop, cfg)
    ordering = order_users(stats, precoder)
    stats_o = apply_ordering(stats, ordering)
    power = allocate_power(cfg, ordering)
    rho = cfg.sic_correlation
    if precoder == "mrt":
        gamma = sinr_mrt_noma(stats_o, power, rho, L)
    else:
        gamma = sinr_fpzf_noma(stats_o, power, rho, L)
    mc = ergodic_sum_rate(cfg, drop, precoder, trials, seed + 1)
    dev = float(np.max(np.abs(mc.gamma - gamma) / gamma))
    return dev, dev <= tol


def check_mrt_closed_form(seed, trials=2000):
    return _closed_vs_mc("mrt", 8, seed, trials, 0.03)


def check_fpzf_closed_form(seed, trials=2000):
    return _closed_vs_mc("fpzf", 12, seed, trials, 0.03)


def check_golden_fixed_point(seed):
    """Unit traces with unit regularization and L = N solve x^2 + x = 1."""
    e, _, _, _ = detequiv.solve_fixed_point(np.ones((1, 6)), 1.0, 6)
    dev = float(np.abs(e - (np.sqrt(5.0) - 1.0) / 2.0).max())
    return dev, dev <= 1e-9


def check_scalar_vs_dense(seed, instances=20):
    """Scalar trace collapse against the explicit-matrix reference."""
    rng = derive_rng(seed, "validate/dense")
    worst = 0.0
    for _ in range(instances):
        N = int(rng.integers(1, 6))
        L = int(rng.integers(N + 1, 17))
        theta_bar = rng.uniform(0.2, 5.0, size=(1, N))
        alpha = float(rng.uniform(0.2, 2.0))
        p_n = rng.uniform(0.1, 1.0, size=N)
        state = detequiv.solve(theta_bar, alpha, L, p_n)
        ref = detequiv.dense_reference(theta_bar[0], alpha, L, p_n)
        for mine, theirs in ((state.e[0], ref["e"]),
                             (state.e_prime[0], ref["e_prime"]),
                             (state.psi_o[0], ref["psi_o"]),
                             (state.upsilon[0], ref["upsilon"])):
            scale = np.maximum(np.abs(theirs), 1e-300)
            worst = max(worst, float(np.max(np.abs(mine - theirs) / scale)))
    return worst, worst <= 1e-10


def check_estimation_invariants(seed, stats=None, drop=None):
    """theta <= beta entrywise and the error-gain identity, checked against
    the drop's own large-scale gains (not values re-derived from the stats)."""
    cfg = SystemConfig()
    if drop is None:
        drop = generate_drop(cfg, seed)
    if stats is None:
        stats = estimation_stats(drop, cfg)
    beta = drop.beta
    gap = float(np.max((stats.theta - beta) / beta))
    ident = float(np.max(np.abs(stats.a ** 2 * stats.theta_bar[:, :, None]
                                - (beta - stats.theta)) / beta))
    dev = max(gap, ident)
    return dev, gap <= 1e-12 and ident <= 1e-12


VALIDATION_CHECKS = (
    ("wishart_moment", check_wishart_moment),
    ("gram_inverse_diagonal", check_gram_inverse_diagonal),
    ("fpzf_nulling", check_fpzf_nulling),
    ("mrt_closed_form_vs_mc", check_mrt_closed_form),
    ("fpzf_closed_form_vs_mc", check_fpzf_closed_form),
    ("golden_fixed_point", check_golden_fixed_point),
    ("scalar_vs_dense_resolvent", check_scalar_vs_dense),
    ("estimation_invariants", check_estimation_invariants),
)


def validate(spec: ExperimentSpec, echo=print):
    """Run every property check; returns (rows, all_passed)."""
    rows = []
    all_ok = True
    for name, check in VALIDATION_CHECKS:
        dev, ok = check(spec.seed)
        all_ok = all_ok and ok
        echo(f"{'PASS' if ok else 'FAIL'} {name} (deviation {dev:.3e})")
        rows.append(_base_row(spec, spec.config,
                              experiment=f"validate/{name}", precoder="",
                              scheme="", sic="", metric="rel_error",
                              value=dev, drop=""))
    return rows, all_ok
