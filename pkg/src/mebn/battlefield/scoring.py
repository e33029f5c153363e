"""Turning a situation into an estimate and scoring it against truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..bn import STAR
from ..hypman import SituationModel, id_sort_key
from .scenario import CO_ACTIVITIES, CO_SUBTYPES, PLATOON_SUBTYPES, Company, GroundTruth, Platoon

DEFAULT_MATCH_RADIUS = 1500.0


def _best(estimates, node: str, states) -> str:
    dist = estimates.get(node, {})
    return max(states, key=lambda s: (dist.get(s, 0.0), -states.index(s)))


def _owner(situation: SituationModel, label: str, ident: str) -> str | None:
    """Committed value, else the candidate with the highest posterior if
    that beats "*", else None."""
    a = situation.association_candidates(label, (ident,))
    if a is None:
        return None
    if a.committed:
        return a.candidates[0]
    post = situation.estimates.get(f"{label}({ident})")
    if not post:
        return a.candidates[0]
    best = max(a.candidates, key=lambda c: (post.get(c, 0.0), -a.candidates.index(c)))
    return best if post.get(best, 0.0) >= post.get(STAR, 0.0) else None


def situation_estimate(situation: SituationModel) -> GroundTruth:
    """Live companies and platoons with their most probable non-"*" states."""
    est = situation.estimates
    out = GroundTruth()
    for p in sorted(situation.instances_of("Company"), key=id_sort_key):
        x, y = situation.features[p].get("pos", (math.nan, math.nan))
        out.companies.append(Company(p, _best(est, f"CoSubType({p})", CO_SUBTYPES),
                                     _best(est, f"CoActivity({p})", CO_ACTIVITIES), x, y))
    reports_of: dict[str, int] = {}
    for r in situation.instances_of("Report"):
        u = _owner(situation, "U", r)
        if u is not None:
            reports_of[u] = reports_of.get(u, 0) + int(situation.features[r].get("size", 1))
    for u in sorted(situation.instances_of("Unit"), key=id_sort_key):
        p = _owner(situation, "P", u)
        if p is None:
            continue
        out.platoons.append(Platoon(u, p, _best(est, f"PltSubType({u})", PLATOON_SUBTYPES), reports_of.get(u, 0)))
    out.star = {i: p for i, p in situation.star_beliefs.items() if situation.has_instance(i)}
    return out


@dataclass(frozen=True)
class Metrics:
    n_true: int
    n_estimated: int
    matched: int
    detection_rate: float
    false_alarms: int
    subtype_accuracy: float
    activity_accuracy: float
    platoon_count_error: float
    pairs: tuple[tuple[str, str], ...] = ()

    def table(self) -> str:
        rows = [
            ("true_companies", str(self.n_true)),
            ("estimated_companies", str(self.n_estimated)),
            ("matched", str(self.matched)),
            ("detection_rate", f"{self.detection_rate:.4f}"),
            ("false_alarms", str(self.false_alarms)),
            ("subtype_accuracy", f"{self.subtype_accuracy:.4f}"),
            ("activity_accuracy", f"{self.activity_accuracy:.4f}"),
            ("platoon_count_error", f"{self.platoon_count_error:.4f}"),
        ]
        return "".join(f"{k}\t{v}\n" for k, v in rows)


def score_situation(estimate: GroundTruth, truth: GroundTruth, match_radius: float = DEFAULT_MATCH_RADIUS) -> Metrics:
    """Greedy nearest-first one-to-one matching of companies within
    ``match_radius``; accuracies are over matched pairs (NaN if none)."""
    if not match_radius > 0:
        raise ValueError("match_radius must be > 0")
    cands = []
    for e in estimate.companies:
        for t in truth.companies:
            d = math.hypot(e.x - t.x, e.y - t.y)
            if d <= match_radius:
                cands.append((d, e.company_id, t.company_id))
    cands.sort()
    used_e, used_t, pairs = set(), set(), []
    for _, e, t in cands:
        if e not in used_e and t not in used_t:
            used_e.add(e)
            used_t.add(t)
            pairs.append((e, t))
    est = {c.company_id: c for c in estimate.companies}
    tru = {c.company_id: c for c in truth.companies}
    m = len(pairs)
    nan = float("nan")
    sub = sum(est[e].subtype == tru[t].subtype for e, t in pairs) / m if m else nan
    act = sum(est[e].activity == tru[t].activity for e, t in pairs) / m if m else nan
    plt = sum(abs(len(estimate.platoons_of(e)) - len(truth.platoons_of(t))) for e, t in pairs) / m if m else nan
    n_true = len(truth.companies)
    return Metrics(n_true, len(estimate.companies), m, m / n_true if n_true else nan,
                   len(estimate.companies) - m, sub, act, plt, tuple(sorted(pairs)))
