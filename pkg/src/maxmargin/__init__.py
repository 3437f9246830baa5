"""Asymptotic theory and simulation of max-margin linear classifiers in high dimensions."""
__version__ = "0.1.0"

from .asymptotics import (AsymptoticPrediction, FixedPoint, kappa_star, kappa_star_isotropic_direct,
                          limit_coordinate_law, margin_bound, misspecified_prediction, psi_down,
                          psi_star_0, psi_star_misspecified, solve_fixed_point, t_value)
from .fkappa import f_kappa, inner_positive_part_sq
from .labels import LabelModel, flip_probability, q_error
from .measures import ActivationCoeffs, SpectralMeasure, activation_coeffs, rf_model
from .quadrature import DEFAULT_NUMERICS, Numerics, QuadratureRule, gauss_hermite, mp_rule
from .wide import WideLimit, wide_limit

__all__ = [
    "ActivationCoeffs", "AsymptoticPrediction", "DEFAULT_NUMERICS", "FixedPoint", "LabelModel",
    "Numerics", "QuadratureRule", "SpectralMeasure", "WideLimit", "activation_coeffs", "f_kappa",
    "flip_probability", "gauss_hermite", "inner_positive_part_sq", "kappa_star",
    "kappa_star_isotropic_direct", "limit_coordinate_law", "margin_bound", "misspecified_prediction",
    "mp_rule", "psi_down", "psi_star_0", "psi_star_misspecified", "q_error", "rf_model",
    "solve_fixed_point", "t_value", "wide_limit",
]
