"""Uncertainty-aware multi-fidelity binary PSO for pixelated frequency-selective surfaces."""

from .bpso import (RunRecord, SwarmConfig, attraction, baseline_bpso, multifidelity_bpso,
                   single_metric_bpso, transfer, update_position)
from .design_codec import expand_octant, features, fold_grid, random_design
from .em_oracle import HFOracle, OracleConfig, SpectralResponse, TargetKind, hf_solve, target_profile
from .metrics import MetricKind, des_mae, ensb_unc, lf_mae, phy_unc
from .stats import ecdf, ks_two_sample, spearman, success_rate
from .surrogate import Ensemble, SurrogateModel, generate_dataset, train, train_ensemble

__version__ = "0.1.0"
