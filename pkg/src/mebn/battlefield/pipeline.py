"""End-to-end processing of a report stream."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..bn import InconsistentEvidenceError
from ..hypman import (
    DEFAULT_GATE_RADIUS,
    DEFAULT_MAX_CANDIDATES,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_PRUNE_THRESHOLD,
    AssociationPolicy,
    CyclePolicy,
    CycleReport,
    GatePolicy,
    SituationModel,
    refine_cycle,
)
from ..kb import MebnKb
from ..ssn import DEFAULT_ASSOC_STAR, ConstructionPolicy
from .scenario import VehicleReport
from .suggestors import DEFAULT_COMPANY_RADIUS, SuggestorConfig, default_suggestors

DOMAIN_TARGETS = {"Company": ("CoSubType", "CoActivity"), "Unit": ("PltSubType", "Activity")}


class BatchError(RuntimeError):
    """Evidence in one batch contradicts the model."""

    def __init__(self, batch: int, cause: Exception):
        super().__init__(f"inconsistent evidence in batch {batch}: {cause}")
        self.batch = batch


@dataclass(frozen=True)
class RunConfig:
    """Policy knobs for one run; ``batch_size`` 0 means one batch per
    distinct report time."""

    gate_radius: float = DEFAULT_GATE_RADIUS
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    association_mode: str = "single"
    new_instances: bool = True
    star_priors: tuple[tuple[str, float], ...] = ()
    assoc_star: float = DEFAULT_ASSOC_STAR
    lazy_expansion: bool = False
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    company_radius: float = DEFAULT_COMPANY_RADIUS
    batch_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")
        self.cycle_policy()  # range checks live in the policy types

    def cycle_policy(self) -> CyclePolicy:
        gate = GatePolicy(self.gate_radius, self.max_candidates)
        assoc = AssociationPolicy(self.association_mode, self.new_instances)
        cons = ConstructionPolicy(star_priors=dict(self.star_priors), assoc_star=self.assoc_star,
                                  lazy_expansion=self.lazy_expansion)
        cons.validate()
        return CyclePolicy(DOMAIN_TARGETS, gate, assoc, self.prune_threshold, self.max_iterations, cons)

    def suggestor_config(self) -> SuggestorConfig:
        p = self.cycle_policy()
        return SuggestorConfig(p.gate, p.association, self.company_radius)

    def describe(self) -> list[str]:
        rows = [
            ("gate_radius", self.gate_radius), ("max_candidates", self.max_candidates),
            ("prune_threshold", self.prune_threshold), ("association_mode", self.association_mode),
            ("new_instances", self.new_instances), ("assoc_star", self.assoc_star),
            ("lazy_expansion", self.lazy_expansion), ("max_iterations", self.max_iterations),
            ("company_radius", self.company_radius), ("batch_size", self.batch_size), ("seed", self.seed),
        ]
        rows += [(f"star_prior.{k}", v) for k, v in sorted(self.star_priors)]
        return [f"{k}={v}" for k, v in rows]


def make_batches(reports: Sequence[VehicleReport], batch_size: int = 0) -> list[list[VehicleReport]]:
    ordered = sorted(reports, key=lambda r: (r.time_s, r.report_id))
    if batch_size > 0:
        return [ordered[i : i + batch_size] for i in range(0, len(ordered), batch_size)]
    out: list[list[VehicleReport]] = []
    for r in ordered:
        if out and out[-1][0].time_s == r.time_s:
            out[-1].append(r)
        else:
            out.append([r])
    return out


@dataclass
class RunResult:
    situation: SituationModel
    cycles: list[CycleReport] = field(default_factory=list)

    @property
    def guard_exceeded(self) -> bool:
        return any(c.guard_exceeded for c in self.cycles)

    @property
    def max_nodes(self) -> int:
        return max((c.max_nodes for c in self.cycles), default=0)


def run_pipeline(
    kb: MebnKb,
    reports: Sequence[VehicleReport],
    cfg: RunConfig = RunConfig(),
    on_cycle: Callable[[CycleReport], None] | None = None,
) -> RunResult:
    """Run one refine cycle per batch.  Raises :class:`BatchError` on
    contradictory evidence; a guard breach is recorded, not raised."""
    policy = cfg.cycle_policy()
    suggestors = default_suggestors(cfg.suggestor_config())
    result = RunResult(SituationModel.empty(kb))
    for k, batch in enumerate(make_batches(reports, cfg.batch_size), 1):
        try:
            sit, rep = refine_cycle(kb, result.situation, batch, suggestors, policy, cycle=k, seed=cfg.seed + k)
        except InconsistentEvidenceError as exc:
            raise BatchError(k, exc) from exc
        result.situation = sit
        result.cycles.append(rep)
        if on_cycle is not None:
            on_cycle(rep)
    return result
