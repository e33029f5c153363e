"""Platoon and company suggestors for the bundled domain.

The platoon suggestor clusters a batch of vehicle reports with the distance
gate and summarizes each cluster into one platoon-level report instance.
The company suggestor groups units that have no parent company yet.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from ..hypman import (
    MULTI,
    AssociationPolicy,
    GatePolicy,
    Nomination,
    SituationModel,
    Suggestor,
    distance_gate,
    enumerate_association_candidates,
    id_sort_key,
)
from .scenario import VehicleReport

PLATOON = "platoon"
COMPANY = "company"
DEFAULT_COMPANY_RADIUS = 2500.0


@dataclass(frozen=True)
class SuggestorConfig:
    """Evidence model used when summarizing clusters.

    Cluster sizes are geometric with ratio ``clutter_size_ratio`` for
    clutter, and a binomial thinning of the roster sizes in
    ``platoon_sizes`` (size, weight) at ``miss_rate`` for real platoons.
    """

    gate: GatePolicy = GatePolicy()
    association: AssociationPolicy = AssociationPolicy()
    company_radius: float = DEFAULT_COMPANY_RADIUS
    miss_rate: float = 0.1
    clutter_size_ratio: float = 0.1
    platoon_sizes: tuple[tuple[int, float], ...] = ((4, 0.75), (5, 0.125), (6, 0.125))
    clutter_activity_weight: float = 0.5
    hq_truck_threshold: int = 2
    size_floor: float = 1e-6

    def __post_init__(self):
        if self.company_radius <= 0:
            raise ValueError("company radius must be > 0")
        if not 0.0 <= self.miss_rate < 1.0 or not 0.0 <= self.clutter_size_ratio < 1.0:
            raise ValueError("miss_rate and clutter_size_ratio must be in [0, 1)")


def summarize_type(reports: Sequence[VehicleReport], hq_trucks: int = 2) -> str:
    """Platoon subtype reading for a cluster: enough trucks make it an HQ;
    the tank/APC majority picks armor or mech, ties going to mech."""
    n = {t: sum(r.vehicle_type == t for r in reports) for t in ("tank", "apc", "truck")}
    base = "armor" if n["tank"] > n["apc"] else "mech"
    return base + "HQ" if n["truck"] >= hq_trucks else base


def summarize_activity(reports: Sequence[VehicleReport]) -> str:
    moving = sum(r.activity == "moving" for r in reports)
    return "moving" if 2 * moving >= len(reports) else "stationary"


def clutter_size_prob(n: int, cfg: SuggestorConfig) -> float:
    q = cfg.clutter_size_ratio
    return (1.0 - q) * q ** (n - 1)


def platoon_size_prob(n: int, cfg: SuggestorConfig) -> float:
    keep = 1.0 - cfg.miss_rate
    p = sum(w * math.comb(size, n) * keep**n * cfg.miss_rate ** (size - n)
            for size, w in cfg.platoon_sizes if n <= size)
    return max(p, cfg.size_floor)


def star_weight(n: int, cfg: SuggestorConfig, n_readings: int = 4) -> float:
    """Likelihood weight of "*" for a cluster of ``n`` reports: how much more
    a clutter cluster explains its size and (uniform) type reading than a
    real platoon explains its size.  The reading under a real platoon is
    handled by the network's confusion table."""
    return clutter_size_prob(n, cfg) / platoon_size_prob(n, cfg) / n_readings


def _centroid(points) -> tuple[float, float]:
    xs, ys = zip(*points)
    return (round(sum(xs) / len(xs), 1), round(sum(ys) / len(ys), 1))


def _nearest(situation: SituationModel, entity_type: str, pos, radius: float) -> str | None:
    best = None
    for i in situation.instances_of(entity_type):
        q = situation.features.get(i, {}).get("pos")
        if q is None:
            continue
        d = math.hypot(q[0] - pos[0], q[1] - pos[1])
        if d <= radius and (best is None or (d, id_sort_key(i)) < best[:2]):
            best = (d, id_sort_key(i), i)
    return best[2] if best else None


def platoon_suggestor(cfg: SuggestorConfig) -> Suggestor:
    def trigger(batch, situation):
        return any(isinstance(r, VehicleReport) for r in batch)

    def action(batch, situation: SituationModel, rng: random.Random) -> list[Nomination]:
        reports = [r for r in batch if isinstance(r, VehicleReport)]
        gen = situation.id_generator.copy()
        out: list[Nomination] = []
        for cluster in distance_gate(reports, cfg.gate):
            pos = _centroid(r.position for r in cluster)
            nominee = _nearest(situation, "Unit", pos, cfg.gate.radius)
            cands = enumerate_association_candidates(situation, "Unit", nominee, pos, cfg.gate,
                                                     cfg.association, gen)
            new_unit = gen.peek("Unit")
            if not cands:
                if not cfg.association.new_instance_allowed:
                    continue
                cands = [new_unit]
            rid = gen.new("Report")
            n = len(cluster)
            out.append(Nomination(PLATOON, "instance", "Report", rid,
                                  (("pos", pos), ("size", n), ("members", tuple(cluster)))))
            if new_unit in cands:
                gen.new("Unit")
                out.append(Nomination(PLATOON, "instance", "Unit", new_unit,
                                      (("pos", pos), ("size", n), ("members", ()))))
            committed = cands == [new_unit]
            out.append(Nomination(PLATOON, "association", label="U", ident=(rid,),
                                  candidates=tuple(cands), committed=committed))
            w = star_weight(n, cfg)
            out.append(Nomination(PLATOON, "evidence", node=f"RepPltSubType({rid})",
                                  weights=((summarize_type(cluster, cfg.hq_truck_threshold), 1.0), ("*", w))))
            out.append(Nomination(PLATOON, "evidence", node=f"ReportedActivity({rid})",
                                  weights=((summarize_activity(cluster), 1.0), ("*", cfg.clutter_activity_weight))))
        return out

    return Suggestor(PLATOON, trigger, action)


def _orphans(situation: SituationModel) -> list[str]:
    return sorted((u for u in situation.instances_of("Unit") if ("P", (u,)) not in situation.associations),
                  key=id_sort_key)


@dataclass(frozen=True)
class _Point:
    report_id: tuple
    position: tuple[float, float]
    unit: str = field(compare=False, default="")


def company_suggestor(cfg: SuggestorConfig) -> Suggestor:
    def trigger(batch, situation):
        return bool(_orphans(situation))

    def action(batch, situation: SituationModel, rng: random.Random) -> list[Nomination]:
        gen = situation.id_generator.copy()
        gate = GatePolicy(cfg.company_radius, cfg.gate.max_candidates)
        pts = [_Point(id_sort_key(u), situation.features[u]["pos"], u) for u in _orphans(situation)]
        out: list[Nomination] = []
        for group in distance_gate(pts, gate):
            units = [p.unit for p in group]
            pos = _centroid(p.position for p in group)
            nominee = _nearest(situation, "Company", pos, cfg.company_radius)
            # a new company is offered only when no existing one is in range
            assoc = cfg.association
            if assoc.mode == MULTI and nominee is not None:
                assoc = AssociationPolicy(MULTI, new_instance_allowed=False)
            cands = enumerate_association_candidates(situation, "Company", nominee, pos, gate, assoc, gen)
            new_co = gen.peek("Company")
            if not cands:
                if not cfg.association.new_instance_allowed:
                    continue
                cands = [new_co]
            seed_unit = None
            if new_co in cands:
                gen.new("Company")
                out.append(Nomination(COMPANY, "instance", "Company", new_co, (("pos", pos),)))
                if cands == [new_co]:
                    sizes = {u: situation.features[u].get("size", 0) for u in units}
                    seed_unit = min(units, key=lambda u: (-sizes[u], id_sort_key(u)))
            for u in units:
                out.append(Nomination(COMPANY, "association", label="P", ident=(u,),
                                      candidates=tuple(cands), committed=u == seed_unit))
        return out

    return Suggestor(COMPANY, trigger, action)


def default_suggestors(cfg: SuggestorConfig | None = None) -> list[Suggestor]:
    cfg = cfg or SuggestorConfig()
    return [platoon_suggestor(cfg), company_suggestor(cfg)]
