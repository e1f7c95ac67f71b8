"""Learned proof-path search over pluggable prover backends."""

from .backend import (
    BackendReply,
    Children,
    Complete,
    Dead,
    SyntheticBackend,
    SyntheticSpec,
    TraceBackend,
    load_trace,
    make_synthetic_factory,
    write_trace,
)
from .baselines import BaselineResult, SearchLimits, bfs_search, dfs_search
from .dqn import (
    DqnConfig,
    EpsilonSchedule,
    Featurizer,
    QNetwork,
    ReplayMemory,
    Transition,
    compute_target,
    epsilon_at,
    select_action,
    train_step,
)
from .loops import LoopDetectorConfig, detect_loop, edit_distance, is_similar
from .search import EpochStats, PathVerdict, SearchConfig, SearchResult, assign_rewards, run
from .theorem import (
    MarkedTree,
    TheoremReport,
    enumerate_report,
    monte_carlo_p,
    sweep,
)
from .tree import ProofPath, RuleNode, VerificationTree, node_id

__version__ = "0.1.0"

__all__ = [
    "BackendReply",
    "BaselineResult",
    "Children",
    "Complete",
    "Dead",
    "DqnConfig",
    "EpochStats",
    "EpsilonSchedule",
    "Featurizer",
    "LoopDetectorConfig",
    "MarkedTree",
    "PathVerdict",
    "ProofPath",
    "QNetwork",
    "ReplayMemory",
    "RuleNode",
    "SearchConfig",
    "SearchLimits",
    "SearchResult",
    "SyntheticBackend",
    "SyntheticSpec",
    "TheoremReport",
    "TraceBackend",
    "Transition",
    "VerificationTree",
    "assign_rewards",
    "bfs_search",
    "compute_target",
    "detect_loop",
    "dfs_search",
    "edit_distance",
    "enumerate_report",
    "epsilon_at",
    "is_similar",
    "load_trace",
    "make_synthetic_factory",
    "monte_carlo_p",
    "node_id",
    "run",
    "select_action",
    "sweep",
    "train_step",
    "write_trace",
]
