"""dyadhist: k-piece multidimensional histogram learning by greedy dyadic splitting."""

from .core import (
    Domain,
    DyadicRect,
    EmpiricalDist,
    GridSpec,
    HistHypothesis,
    HistKind,
    Piece,
    Rect,
    eval_hist,
    flatten,
    l1_dist,
    l2_sq_dist,
    mass,
    volume,
)
from .ddist import DFitResult, SparseDyadicTree, brute_d1, build_tree, compute_d1, fit_d1
from .split import (
    SplitParams,
    SplitTrace,
    adaptive_greedy_split,
    build_adaptive_grid,
    default_gamma,
    greedy_split,
    greedy_split_l2,
    piece_bound,
    renormalize,
)
from .theory import BudgetFormula, SampleBudget, sample_budget, strictly_greater_region, to_hierarchical
from .oracle import (
    OracleGuard,
    dk_distance,
    dk_distance_between,
    opt_hier_l2,
    opt_partial_hier_dk,
)
from .cli import RunConfig, LearnReport, gen_truth, run_learn, sample_from

__version__ = "0.1.0"
