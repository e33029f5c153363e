"""Hypothesis management: suggestors, gating, pruning and the refine cycle."""

from .cycle import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_PRUNE_THRESHOLD,
    CyclePolicy,
    CycleReport,
    IterationRecord,
    NetRecord,
    component_query,
    evaluate_situation,
    prune_by_star,
    refine_cycle,
)
from .gating import DEFAULT_GATE_RADIUS, DEFAULT_MAX_CANDIDATES, GatePolicy, count_ungated_candidates, distance_gate
from .situation import SituationModel, id_sort_key
from .suggest import (
    MULTI,
    SINGLE,
    AssociationPolicy,
    FiringResult,
    Nomination,
    Suggestor,
    apply_nomination,
    enumerate_association_candidates,
    fire_suggestors,
)

__all__ = [
    "DEFAULT_MAX_ITERATIONS",
    "DEFAULT_PRUNE_THRESHOLD",
    "CyclePolicy",
    "CycleReport",
    "IterationRecord",
    "NetRecord",
    "component_query",
    "evaluate_situation",
    "prune_by_star",
    "refine_cycle",
    "DEFAULT_GATE_RADIUS",
    "DEFAULT_MAX_CANDIDATES",
    "GatePolicy",
    "count_ungated_candidates",
    "distance_gate",
    "SituationModel",
    "id_sort_key",
    "MULTI",
    "SINGLE",
    "AssociationPolicy",
    "FiringResult",
    "Nomination",
    "Suggestor",
    "apply_nomination",
    "enumerate_association_candidates",
    "fire_suggestors",
]
