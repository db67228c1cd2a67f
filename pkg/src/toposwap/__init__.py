"""DAG structure learning by KKT-guided topological swaps."""

from .acyclicity import h_grad, h_value
from .datagen import SemInstance, make_instance, random_dag
from .estimator import TopoDAG
from .graph import is_consistent, shd, swap, threshold, topological_sort
from .models import LinearParams, MLPParams, weight_matrix
from .scores import ScoreSpec, evaluate
from .search import SearchConfig, exhaustive_oracle, kkt_flag, kkt_matrix, topo_search
from .solver import OrderSolver, SolveOptions, solve_order

__version__ = "0.1.0"

__all__ = [
    "TopoDAG",
    "OrderSolver",
    "SolveOptions",
    "SearchConfig",
    "ScoreSpec",
    "LinearParams",
    "MLPParams",
    "SemInstance",
    "make_instance",
    "random_dag",
    "solve_order",
    "topo_search",
    "exhaustive_oracle",
    "kkt_matrix",
    "kkt_flag",
    "evaluate",
    "h_value",
    "h_grad",
    "weight_matrix",
    "topological_sort",
    "is_consistent",
    "swap",
    "threshold",
    "shd",
]
