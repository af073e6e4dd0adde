"""Critical site percolation on the triangular lattice in the upper half-plane.

Exact enumeration, a compiled Monte Carlo engine over counter-based random
bits, conformal-radius estimators, and closed-form predictions for
boundary connection probabilities.
"""
from .events import EventSpec, MarkedPoints, evaluate
from .experiments import EstimatePlan, ratio_with_ci, run_estimates
from .lattice import Region, build_region, site_of_point
from .percolation import BitConfig, label_clusters, sample_config

__version__ = "0.1.0"

__all__ = [
    "BitConfig",
    "EstimatePlan",
    "EventSpec",
    "MarkedPoints",
    "Region",
    "build_region",
    "evaluate",
    "label_clusters",
    "ratio_with_ci",
    "run_estimates",
    "sample_config",
    "site_of_point",
]
