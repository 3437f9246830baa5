"""Finite-sample data generation, classifiers and error metrics."""
from .datasets import Dataset, SigmaDescriptor, sample_dataset, sample_isotropic, sample_misspecified, sample_rf
from .maxmargin import MaxMarginSolution, logistic_direction, max_margin, max_margin_xy
from .metrics import empirical_coordinate_law, exact_test_error, mc_test_error, sliced_ks
from .softmargin import soft_margin, soft_margin_augmented

__all__ = [
    "Dataset", "MaxMarginSolution", "SigmaDescriptor", "empirical_coordinate_law",
    "exact_test_error", "logistic_direction", "max_margin", "max_margin_xy", "mc_test_error",
    "sample_dataset", "sample_isotropic", "sample_misspecified", "sample_rf", "sliced_ks",
    "soft_margin", "soft_margin_augmented",
]
