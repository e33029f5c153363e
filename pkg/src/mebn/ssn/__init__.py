"""Situation-specific network construction and evaluation."""

from .construct import (
    DEFAULT_ASSOC_STAR,
    AssociationNode,
    ConstructedNetwork,
    ConstructionPolicy,
    Multiplexer,
    ParentSlot,
    Provenance,
    assemble_multiplexer_cpt,
    augment_star,
    construct_ssn,
    minimalize,
    star_extend,
    star_root_prior,
)
from .evaluate import Posterior, evaluate_query
from .query import (
    UNBOUND,
    AssociationCandidates,
    ConstructionError,
    EmptyQueryError,
    Query,
    SituationLike,
    SituationView,
    format_posteriors,
    parse_node_id,
    parse_query,
    resolve_query,
)

__all__ = [
    "DEFAULT_ASSOC_STAR",
    "AssociationNode",
    "ConstructedNetwork",
    "ConstructionPolicy",
    "Multiplexer",
    "ParentSlot",
    "Provenance",
    "assemble_multiplexer_cpt",
    "augment_star",
    "construct_ssn",
    "minimalize",
    "star_extend",
    "star_root_prior",
    "Posterior",
    "evaluate_query",
    "UNBOUND",
    "AssociationCandidates",
    "ConstructionError",
    "EmptyQueryError",
    "Query",
    "SituationLike",
    "SituationView",
    "format_posteriors",
    "parse_node_id",
    "parse_query",
    "resolve_query",
]
