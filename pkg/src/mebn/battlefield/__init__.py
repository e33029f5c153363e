"""Ground-force situation assessment domain."""

from .domain import build_domain_kb, domain_kb_text
from .pipeline import DOMAIN_TARGETS, BatchError, RunConfig, RunResult, make_batches, run_pipeline
from .scenario import (
    CSV_HEADER,
    ROSTERS,
    Company,
    GroundTruth,
    Platoon,
    Scenario,
    ScenarioConfig,
    ScenarioFormatError,
    Vehicle,
    VehicleReport,
    company_subtype_for,
    dumps_reports,
    dumps_truth,
    generate_scenario,
    loads_reports,
    loads_truth,
    read_reports,
    read_truth,
    write_reports,
    write_truth,
)
from .scoring import DEFAULT_MATCH_RADIUS, Metrics, score_situation, situation_estimate
from .suggestors import (
    SuggestorConfig,
    company_suggestor,
    default_suggestors,
    platoon_suggestor,
    star_weight,
    summarize_activity,
    summarize_type,
)

__all__ = [
    "build_domain_kb", "domain_kb_text",
    "DOMAIN_TARGETS", "BatchError", "RunConfig", "RunResult", "make_batches", "run_pipeline",
    "CSV_HEADER", "ROSTERS", "Company", "GroundTruth", "Platoon", "Scenario", "ScenarioConfig",
    "ScenarioFormatError", "Vehicle", "VehicleReport", "company_subtype_for", "dumps_reports", "dumps_truth",
    "generate_scenario", "loads_reports", "loads_truth", "read_reports", "read_truth", "write_reports",
    "write_truth",
    "DEFAULT_MATCH_RADIUS", "Metrics", "score_situation", "situation_estimate",
    "SuggestorConfig", "company_suggestor", "default_suggestors", "platoon_suggestor", "star_weight",
    "summarize_activity", "summarize_type",
]
