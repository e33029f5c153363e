"""MEBN knowledge base: hypothesis types, fragment types, validation, text format."""

from .model import (
    DEFAULT_STAR_PRIOR,
    AssociationHypothesisType,
    EntityType,
    FragmentInstance,
    FragmentNode,
    FragmentSpec,
    FragmentType,
    HypothesisInstance,
    HypothesisType,
    IdGenerator,
    KbError,
    MebnKb,
    derive_association_hypotheses,
    node_id,
)
from .validate import ValidationReport, Violation, graph_union, union_to_dot, validate_mebn
from .kbformat import KbParseError, dump_kb, dumps_kb, load_kb, loads_kb

__all__ = [
    "DEFAULT_STAR_PRIOR",
    "AssociationHypothesisType",
    "EntityType",
    "FragmentInstance",
    "FragmentNode",
    "FragmentSpec",
    "FragmentType",
    "HypothesisInstance",
    "HypothesisType",
    "IdGenerator",
    "KbError",
    "MebnKb",
    "derive_association_hypotheses",
    "node_id",
    "ValidationReport",
    "Violation",
    "graph_union",
    "union_to_dot",
    "validate_mebn",
    "KbParseError",
    "dump_kb",
    "dumps_kb",
    "load_kb",
    "loads_kb",
]
