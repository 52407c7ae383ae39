"""Downlink rate analysis for cell-free massive MIMO with power-domain NOMA.

The library simulates a network of multi-antenna access points jointly serving
user clusters that share uplink pilots, builds three per-AP precoders from
local estimates (conjugate beamforming, full-pilot zero forcing, and a
regularized local inverse), and evaluates per-user achievable rates both in
closed form and with an independent Monte Carlo estimator.
"""

from .detequiv import DetEquivState, dense_reference, sinr_mrzf_noma, solve_fixed_point
from .errors import (ConfigError, ConvergenceFailure, DegenerateSamples,
                     IllConditionedSystem, PrecoderInfeasible, PrelogInfeasible)
from .estimation import (ChannelRealization, EstimationStats, draw_small_scale,
                         estimation_stats, mmse_estimate, pilot_observation, realize)
from .montecarlo import EffectiveGainSamples, collect_gains, empirical_sinr, ergodic_sum_rate
from .noma import (PRECODERS, PowerAllocation, allocate_power, apply_ordering,
                   order_users, ordering_metric, reorder)
from .precoding import PrecoderSet, build, fpzf, mrt, mrzf
from .rates import (RateReport, assemble_report, sinr_fpzf_noma, sinr_limit_large_l,
                    sinr_mrt_noma, sinr_oma)
from .scenario import (NOMA, OMA, NetworkDrop, SystemConfig, config_hash,
                       dump_config, generate_drop, load_config, noise_variance,
                       path_loss_db)
from . import detequiv

__version__ = "0.1.0"
