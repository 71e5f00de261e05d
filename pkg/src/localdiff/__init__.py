"""Multiscale nearest-neighbor test for local differences between two densities."""

__version__ = "0.1.0"

from .calibration import CalibrationConstants, bernstein_quantile, correction, delta_mn, gamma_log, r_psi
from .classify import LabeledPoints, classify_test
from .core import (DataError, DegenerateError, DuplicatePointWarning, KernelSpec, PooledSample, WeightedLabels,
                   default_kmax, validate_sample, weighted_label)
from .multiscale import multiscale_stat, significant_regions
from .neighbors import NeighborOrder, neighbor_order
from .permutation import PermutationConfig, TestReport, permutation_quantile, run_test
from .recovery import RecoveryConstants, critical_rate, recovery_norm, separation_constant
from .simgen import Deviation, MixedDensity, Scenario, power_study, sample_scenario
from .univariate import rank_stat, univariate_test

__all__ = [
    "CalibrationConstants", "bernstein_quantile", "correction", "delta_mn", "gamma_log", "r_psi",
    "LabeledPoints", "classify_test",
    "DataError", "DegenerateError", "DuplicatePointWarning", "KernelSpec", "PooledSample", "WeightedLabels",
    "default_kmax", "validate_sample", "weighted_label",
    "multiscale_stat", "significant_regions", "NeighborOrder", "neighbor_order",
    "PermutationConfig", "TestReport", "permutation_quantile", "run_test",
    "RecoveryConstants", "critical_rate", "recovery_norm", "separation_constant",
    "Deviation", "MixedDensity", "Scenario", "power_study", "sample_scenario",
    "rank_stat", "univariate_test",
]
