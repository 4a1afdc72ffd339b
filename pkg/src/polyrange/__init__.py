"""polyrange: simulation and numerical analysis of a range-penalized random
walk coupled to a heavy-tailed disorder field on Z^d."""

from polyrange.errors import BudgetExceeded, ValidationError
from polyrange.params import (InvalidParams, ModelParams, RegionReport,
                              classify_region, heuristic_orders)

__all__ = [
    "BudgetExceeded",
    "InvalidParams",
    "ModelParams",
    "RegionReport",
    "ValidationError",
    "classify_region",
    "heuristic_orders",
]
__version__ = "0.1.0"
