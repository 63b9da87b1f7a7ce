"""Pointwise solvers for linear-in-state control and differential games,
applied to a two-country climate-economy model."""

__version__ = "0.1.0"

from .climate_econ import (Allocation, ClimateParams, EconParams, TechCurve,
                           emissions, phi_constant, temperature)
from .itm_core import (ControlPath, DiscountedLinearObjective,
                       LinearStateSystem, ShadowWeight, StatePath, TimeGrid,
                       evaluate_original, evaluate_transformed,
                       evolution_operator, fubini_check, integrate_state,
                       pointwise_solve, shadow_weight, temporary_nash)
from .regimes import (ComparisonReport, RegimeSolution, compare_regimes,
                      gp_closed_form, hetero_discount_path, nash_closed_form,
                      rp_closed_form, solve_regime, temporary_oracle)
from .robust import (ALPHA_INF, RandomizationSpec, RobustParams, alpha_sweep,
                     randomized_bands, robust_gp, robust_nash, robust_rp)

__all__ = [
    "Allocation", "ClimateParams", "EconParams", "TechCurve", "emissions",
    "phi_constant", "temperature", "ControlPath",
    "DiscountedLinearObjective", "LinearStateSystem", "ShadowWeight",
    "StatePath", "TimeGrid", "evaluate_original", "evaluate_transformed",
    "evolution_operator", "fubini_check", "integrate_state",
    "pointwise_solve", "shadow_weight", "temporary_nash",
    "ComparisonReport", "RegimeSolution", "compare_regimes",
    "gp_closed_form", "hetero_discount_path", "nash_closed_form",
    "rp_closed_form", "solve_regime", "temporary_oracle", "ALPHA_INF",
    "RandomizationSpec", "RobustParams", "alpha_sweep", "randomized_bands",
    "robust_gp", "robust_nash", "robust_rp",
]
