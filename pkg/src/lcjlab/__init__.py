"""Desk-scale lab for Lipschitz variation of jump sequences on finite metric spaces."""

from .errors import CapExceededError, LabError, PropertyCheckError, ValidationError
from .metric import FiniteMetricSpace, LipschitzFunction, from_euclidean, from_weighted_graph, validate_metric
from .variation import PairMeasure, StepCurve, pair_variation, var_of_curve
from .lipschitz import kantorovich_value, lcj_ratio, lvar_candidates, lvar_exact, lvar_localsearch

__version__ = "0.1.0"

__all__ = [
    "CapExceededError", "FiniteMetricSpace", "LabError", "LipschitzFunction", "PairMeasure",
    "PropertyCheckError", "StepCurve", "ValidationError", "from_euclidean", "from_weighted_graph",
    "kantorovich_value", "lcj_ratio", "lvar_candidates", "lvar_exact", "lvar_localsearch",
    "pair_variation", "validate_metric", "var_of_curve",
]
