"""Fast Gaussian kernel summation with guaranteed per-query relative error.

Dual-tree recursion over kd-trees with finite-difference and truncated
Hermite/Taylor series approximations, hierarchical translation operators,
and token-based global error control.
"""

from .error_bounds import Method, MethodChoice, NodePairGeometry, best_method
from .series_expansion import (
    FarFieldExpansion,
    LocalExpansion,
    accumulate_far_field,
    accumulate_local_direct,
    eval_far_field,
    eval_local,
    translate_h2h,
    translate_h2l,
    translate_l2l,
)
from .spatial_index import KdTree, PointStore, build_tree, default_plimit
from .summation_engine import (
    ResultVector,
    RunConfig,
    TraversalCounters,
    dfd_run,
    dfdo_run,
    dito_post,
    dito_run,
    naive_sum,
)

__all__ = [
    "FarFieldExpansion",
    "LocalExpansion",
    "KdTree",
    "Method",
    "MethodChoice",
    "NodePairGeometry",
    "PointStore",
    "ResultVector",
    "RunConfig",
    "TraversalCounters",
    "accumulate_far_field",
    "accumulate_local_direct",
    "best_method",
    "build_tree",
    "default_plimit",
    "dfd_run",
    "dfdo_run",
    "dito_post",
    "dito_run",
    "eval_far_field",
    "eval_local",
    "naive_sum",
    "translate_h2h",
    "translate_h2l",
    "translate_l2l",
]

__version__ = "0.1.0"
