"""Best-first tree search with rerooting weights (rooted Levin tree search)."""
from .baselines import PuctNodeStats, PuctResult, bfs_breadth, lts_search, puct_search
from .costs import (
    AncestorCostEntry,
    BreadthCost,
    CmaxCost,
    CtildeCost,
    DepthCost,
    RootedCost,
    SlendernessCost,
    ancestor_set_update,
    cmax_cost,
    crlts_root_cost,
    ctilde_cost,
    dop_cost,
    naive_crlts_cost,
    rooted_sop_cost,
    slenderness_update,
    sop_cost,
)
from .rerooting import make_rerooter
from .search import (
    ContractViolation,
    Environment,
    NodeNotFound,
    NodeRecord,
    NumericFault,
    SearchError,
    SearchRun,
    Signal,
    StopReason,
    VisitContext,
    derive_rng,
    reconstruct_path,
    run_search,
)

__version__ = "0.1.0"
