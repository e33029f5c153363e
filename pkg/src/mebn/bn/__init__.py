"""Finite discrete Bayesian networks: validation, exact inference, pruning."""

from .network import (
    STAR,
    CptError,
    CycleError,
    DiscreteNode,
    InconsistentEvidenceError,
    Network,
    NetworkError,
    UnknownNodeError,
    build_network,
)
from .inference import (
    DEFAULT_JOINT_CAP,
    JointQueryResult,
    brute_force_joint,
    exact_query,
    marginals,
    min_fill_order,
    oracle_posterior,
)
from .independence import d_separated, prune_for_query, reachable, requisite_nodes

__all__ = [
    "STAR",
    "CptError",
    "CycleError",
    "DiscreteNode",
    "InconsistentEvidenceError",
    "Network",
    "NetworkError",
    "UnknownNodeError",
    "build_network",
    "DEFAULT_JOINT_CAP",
    "JointQueryResult",
    "brute_force_joint",
    "exact_query",
    "marginals",
    "min_fill_order",
    "oracle_posterior",
    "d_separated",
    "prune_for_query",
    "reachable",
    "requisite_nodes",
]
