"""Variant domains, surrogate datasets, benchmark runs and data profiles."""

from .data import Dataset, assign_splits, largest_remainder, read_points_csv, sample_dataset, split_counts, write_dataset
from .profiles import ProfileRecord, data_profile, tau_solved_at
from .runner import aggregate_curve, run_benchmark
from .surrogate import lipschitz_bound, surrogate_score
from .variants import ARCHITECTURES, SIZES, TABLE6A, TABLE6B, VARIANTS, build_variant, signature_sizes

__all__ = [
    "ARCHITECTURES", "SIZES", "TABLE6A", "TABLE6B", "VARIANTS", "Dataset", "ProfileRecord",
    "aggregate_curve", "assign_splits", "build_variant", "data_profile", "largest_remainder",
    "lipschitz_bound", "read_points_csv", "run_benchmark", "sample_dataset", "signature_sizes",
    "split_counts", "surrogate_score", "tau_solved_at", "write_dataset",
]
