"""Mining similar or diverse sets of describable tagging-action groups."""

from .fdp import dv_fdp, dv_fdp_fi, dv_fdp_fo
from .lsh import sm_lsh, sm_lsh_fi, sm_lsh_fo
from .mining import ProblemSpec, ResultSet, check_feasible, exact_solve, objective_score, resolve_problem
from .model import GroupDescriptor, Predicate, TaggingGroup, TaggingTuple, TupleStore, enumerate_groups, read_tuples
from .signature import MiningMeasure, TagSignature, aggregate_score, pairwise_score

__version__ = "0.1.0"

__all__ = [
    "GroupDescriptor", "MiningMeasure", "Predicate", "ProblemSpec", "ResultSet", "TagSignature",
    "TaggingGroup", "TaggingTuple", "TupleStore", "aggregate_score", "check_feasible", "dv_fdp",
    "dv_fdp_fi", "dv_fdp_fo", "enumerate_groups", "exact_solve", "objective_score", "pairwise_score",
    "read_tuples", "resolve_problem", "sm_lsh", "sm_lsh_fi", "sm_lsh_fo",
]
