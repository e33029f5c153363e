"""The refine cycle: suggest, build networks, evaluate, prune."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from ..bn import STAR
from ..kb.model import MebnKb
from ..ssn import ConstructionPolicy, Query, construct_ssn, evaluate_query, minimalize
from .gating import GatePolicy
from .situation import SituationModel, id_sort_key
from .suggest import AssociationPolicy, Suggestor, apply_nomination, fire_suggestors

DEFAULT_PRUNE_THRESHOLD = 0.9
DEFAULT_MAX_ITERATIONS = 5


@dataclass(frozen=True)
class CyclePolicy:
    """``targets`` maps an entity type to the hypothesis labels queried for
    each of its instances; the first label is the anchor whose P(*) is the
    instance's star belief.  Hypothetical associations are always queried
    as well."""

    targets: Mapping[str, tuple[str, ...]]
    gate: GatePolicy = GatePolicy()
    association: AssociationPolicy = AssociationPolicy()
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    construction: ConstructionPolicy = ConstructionPolicy()

    def __post_init__(self):
        if not 0.0 < self.prune_threshold <= 1.0:
            raise ValueError(f"prune threshold must be in (0, 1], got {self.prune_threshold}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class NetRecord:
    component: tuple[str, ...]
    node_count: int
    association_nodes: dict[str, tuple[str, ...]]


@dataclass
class IterationRecord:
    suggestors_fired: list[str] = field(default_factory=list)
    nominations: list[str] = field(default_factory=list)
    nets: list[NetRecord] = field(default_factory=list)
    pruned: list[tuple[str, float | None]] = field(default_factory=list)


@dataclass
class CycleReport:
    cycle: int
    iterations: list[IterationRecord] = field(default_factory=list)
    wall_ms: float = 0.0
    guard_exceeded: bool = False

    @property
    def fired(self) -> list[str]:
        out: list[str] = []
        for it in self.iterations:
            out.extend(s for s in it.suggestors_fired if s not in out)
        return out

    @property
    def n_nets(self) -> int:
        return sum(len(it.nets) for it in self.iterations)

    @property
    def max_nodes(self) -> int:
        return max((n.node_count for it in self.iterations for n in it.nets), default=0)

    @property
    def pruned(self) -> list[str]:
        return [p for it in self.iterations for p, _ in it.pruned]

    def summary(self, with_time: bool = True) -> str:
        s = (f"CYCLE {self.cycle} | suggestors_fired={','.join(self.fired) or '-'} | nets={self.n_nets}"
             f" | max_nodes={self.max_nodes} | pruned={len(self.pruned)}")
        if with_time:
            s += f" | wall_ms={self.wall_ms:.0f}"
        return s

    def lines(self, with_time: bool = False) -> list[str]:
        """Summary line then indented detail (no timing by default, so logs
        are reproducible)."""
        out = [self.summary(with_time)]
        for k, it in enumerate(self.iterations, 1):
            out.append(f"  ITER {k} nominations={len(it.nominations)}")
            out.extend(f"    SUGGEST {n}" for n in it.nominations)
            for net in it.nets:
                out.append(f"    NET {net.component[0]} members={len(net.component)} nodes={net.node_count}")
                for a, cands in sorted(net.association_nodes.items()):
                    out.append(f"      ASSOC {a} candidates={','.join(cands)}")
            if it.pruned:
                out.append("    PRUNED " + " ".join(
                    f"{i}(P*={'-' if p is None else format(p, '.6f')})" for i, p in it.pruned))
        if self.guard_exceeded:
            out.append("  GUARD iteration limit reached")
        return out


def component_query(situation: SituationModel, component: Sequence[str], policy: CyclePolicy) -> Query | None:
    members = set(component)
    targets = []
    for i in component:
        labels = policy.targets.get(situation.entity_type_of(i), ())
        targets.extend(f"{lab}({i})" for lab in labels)
    for (label, ident), a in sorted(situation.associations.items()):
        if not a.committed and members.issuperset(ident):
            targets.append(f"{label}({','.join(ident)})")
    if not targets:
        return None

    def mine(node):
        ids = node[node.index("(") + 1 : -1].split(",")
        return all(x in members for x in ids)

    ev = {k: v for k, v in situation.evidence.items() if mine(k)}
    lk = {k: v for k, v in situation.likelihoods.items() if mine(k)}
    return Query(tuple(targets), ev, lk)


def evaluate_situation(kb: MebnKb, situation: SituationModel, policy: CyclePolicy) -> list[NetRecord]:
    """Build and evaluate one network per connected component.

    Updates ``situation.estimates`` and ``situation.star_beliefs`` in place.
    """
    records = []
    star_types = set(policy.targets)
    situation.estimates.clear()
    for comp in situation.components():
        q = component_query(situation, comp, policy)
        if q is None:
            continue
        stars = frozenset(i for i in comp if situation.entity_type_of(i) in star_types)
        cpol = replace(policy.construction, star_instances=policy.construction.star_instances | stars)
        cn = minimalize(construct_ssn(kb, situation, q, cpol))
        post = evaluate_query(cn, q)
        situation.estimates.update(post.marginals)
        for i in comp:
            labels = policy.targets.get(situation.entity_type_of(i), ())
            if labels:
                situation.star_beliefs[i] = post.marginals[f"{labels[0]}({i})"].get(STAR, 0.0)
        records.append(NetRecord(tuple(comp), len(cn),
                                 {a: n.candidates for a, n in cn.association_nodes.items()}))
    return records


def prune_by_star(situation: SituationModel, threshold: float = DEFAULT_PRUNE_THRESHOLD) -> list[tuple[str, float | None]]:
    """Remove every instance whose star belief is at least ``threshold``,
    plus whatever depends on it.  Returns ``(id, star belief)`` per removal;
    the belief is None for instances that went transitively without one."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"prune threshold must be in (0, 1], got {threshold}")
    beliefs = dict(situation.star_beliefs)
    doomed = sorted((i for i, p in beliefs.items() if p >= threshold and situation.has_instance(i)), key=id_sort_key)
    return [(i, beliefs.get(i)) for i in situation.remove_instances(doomed)]


def _argmax(estimates: Mapping[str, Mapping[str, float]]) -> dict[str, str]:
    return {n: max(sorted(d), key=lambda s: d[s]) for n, d in estimates.items()}


def refine_cycle(
    kb: MebnKb,
    situation: SituationModel,
    batch: Sequence[Any],
    suggestors: Sequence[Suggestor],
    policy: CyclePolicy,
    cycle: int = 1,
    seed: int = 0,
) -> tuple[SituationModel, CycleReport]:
    """Process one evidence batch and return the updated situation.

    Reports in the unassociated pool are offered again with the batch.
    After a pass that nominated, pruned or changed the most probable state
    of an existing target, suggestors re-fire with an empty batch; the
    cycle ends when they have nothing to add.  At most ``max_iterations``
    passes run; needing more sets ``guard_exceeded`` and keeps the last
    pass.
    """
    t0 = time.perf_counter()
    sit = situation.copy()
    sit.batch_index = cycle
    report = CycleReport(cycle)
    offered = list(sit.unassociated) + list(batch)
    sit.unassociated = []
    before = _argmax(sit.estimates)
    for it in range(policy.max_iterations):
        fired = fire_suggestors(sit, offered if it == 0 else [], suggestors, seed=seed + 7919 * it)
        if it > 0 and not fired.nominations:
            break  # nothing new to evaluate, so posteriors stand
        rec = IterationRecord(fired.fired)
        for n in fired.nominations:
            apply_nomination(sit, n)
            rec.nominations.append(n.describe())
        rec.nets = evaluate_situation(kb, sit, policy)
        rec.pruned = prune_by_star(sit, policy.prune_threshold)
        if rec.pruned:
            evaluate_situation(kb, sit, policy)
        report.iterations.append(rec)
        after = _argmax(sit.estimates)
        changed = any(after.get(n, v) != v for n, v in before.items())
        before = after
        if not (changed or fired.nominations or rec.pruned):
            break
    else:
        report.guard_exceeded = True
    report.wall_ms = (time.perf_counter() - t0) * 1000.0
    return sit, report
