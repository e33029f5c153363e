"""Queries over hypothesis instances and their text syntax."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from ..bn.network import STAR
from ..kb.model import MebnKb, node_id

UNBOUND = "?"

_NODE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*([^()]*?)\s*\)\s*$")


class ConstructionError(ValueError):
    """The KB, situation, query or policy does not admit a network."""


class EmptyQueryError(ConstructionError):
    """Unbound targets matched no live instance."""


@dataclass(frozen=True)
class AssociationCandidates:
    """Answer of a candidate enumerator for one association hypothesis.

    ``committed`` marks a definite binding; it requires exactly one
    candidate and yields a plain edge instead of an association node.
    """

    candidates: tuple[str, ...]
    committed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.committed and len(self.candidates) != 1:
            raise ConstructionError("a committed association needs exactly one candidate")
        if STAR in self.candidates:
            raise ConstructionError("'*' is added automatically, not enumerated")


class SituationLike(Protocol):
    def instances_of(self, entity_type: str) -> Sequence[str]: ...

    def has_instance(self, instance_id: str) -> bool: ...

    def association_candidates(self, label: str, ident: tuple[str, ...]) -> AssociationCandidates | None: ...


@dataclass
class SituationView:
    """Plain situation snapshot: live instances plus association answers keyed
    by ``(association label, identifying ids)``."""

    instances: dict[str, list[str]] = field(default_factory=dict)
    associations: dict[tuple[str, tuple[str, ...]], AssociationCandidates] = field(default_factory=dict)

    def add(self, entity_type: str, *ids: str) -> "SituationView":
        self.instances.setdefault(entity_type, []).extend(ids)
        return self

    def commit(self, label: str, ident: str | tuple[str, ...], value: str) -> "SituationView":
        ident = (ident,) if isinstance(ident, str) else tuple(ident)
        self.associations[(label, ident)] = AssociationCandidates((value,), committed=True)
        return self

    def hypothesize(self, label: str, ident: str | tuple[str, ...], candidates: Iterable[str]) -> "SituationView":
        ident = (ident,) if isinstance(ident, str) else tuple(ident)
        self.associations[(label, ident)] = AssociationCandidates(tuple(candidates))
        return self

    def instances_of(self, entity_type: str) -> list[str]:
        return list(self.instances.get(entity_type, ()))

    def has_instance(self, instance_id: str) -> bool:
        return any(instance_id in ids for ids in self.instances.values())

    def association_candidates(self, label, ident):
        return self.associations.get((label, tuple(ident)))


def parse_node_id(text: str) -> tuple[str, tuple[str, ...]]:
    m = _NODE.match(text)
    if not m:
        raise ConstructionError(f"malformed node reference {text!r}")
    ids = tuple(x.strip() for x in m.group(2).split(",")) if m.group(2).strip() else ()
    if any(not x for x in ids):
        raise ConstructionError(f"malformed node reference {text!r}")
    return m.group(1), ids


@dataclass(frozen=True)
class Query:
    """Targets are node ids ``Type(id,...)`` where ``?`` leaves an attribute
    unbound.  ``likelihoods`` holds virtual evidence: per node, a weight for
    each named state (unnamed states weigh 0)."""

    targets: tuple[str, ...]
    evidence: Mapping[str, str] = field(default_factory=dict)
    likelihoods: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "evidence", dict(self.evidence))
        object.__setattr__(self, "likelihoods", {k: dict(v) for k, v in self.likelihoods.items()})

    @property
    def observed(self) -> set[str]:
        return set(self.evidence) | set(self.likelihoods)


def parse_query(targets: Iterable[str], evidence: Iterable[str] = ()) -> Query:
    """Build a query from CLI-style strings: ``CoSubType(?)`` and ``RepPltSubType(r1)=armor``."""
    tgt = []
    for t in targets:
        label, ids = parse_node_id(t)
        tgt.append(node_id(label, ids))
    ev = {}
    for e in evidence:
        if "=" not in e:
            raise ConstructionError(f"evidence {e!r} must look like Type(ids)=state")
        ref, state = e.rsplit("=", 1)
        label, ids = parse_node_id(ref)
        if UNBOUND in ids:
            raise ConstructionError(f"evidence {e!r} must be fully bound")
        ev[node_id(label, ids)] = state.strip()
    return Query(tuple(tgt), ev)


def resolve_query(kb: MebnKb, situation: SituationLike, query: Query) -> Query:
    """Expand ``?`` targets over live instances and check the query.

    Raises :class:`ConstructionError` for unknown types, type mismatches,
    bad states and targets that are also evidence.
    """
    if not query.targets:
        raise ConstructionError("query has no targets")
    targets: list[str] = []
    for t in query.targets:
        label, ids = parse_node_id(t)
        attributes = _target_attributes(kb, label)
        if len(ids) != len(attributes):
            raise ConstructionError(f"{t}: expected {len(attributes)} ids")
        pools = []
        for x, (_, et) in zip(ids, attributes):
            if x == UNBOUND:
                pools.append(sorted(situation.instances_of(et), key=_id_key))
            else:
                _check_binding(kb, t, x, et)
                pools.append([x])
        for combo in _product(pools):
            nid = node_id(label, combo)
            if nid not in targets:
                targets.append(nid)
    if not targets:
        raise EmptyQueryError("query targets expand to no instances")
    for table in (query.evidence, query.likelihoods):
        for nid, val in table.items():
            label, ids = parse_node_id(nid)
            ht = kb.hypothesis_types.get(label)
            if ht is None:
                raise ConstructionError(f"unknown hypothesis type {label!r}")
            if len(ids) != len(ht.attributes):
                raise ConstructionError(f"{nid}: expected {len(ht.attributes)} ids")
            for x, (_, et) in zip(ids, ht.attributes):
                _check_binding(kb, nid, x, et)
                if not situation.has_instance(x):
                    raise ConstructionError(f"evidence {nid}: instance {x} is not in the situation")
            states = [val] if isinstance(val, str) else list(val)
            for s in states:
                if s not in ht.values and s != STAR:
                    raise ConstructionError(f"evidence {nid}: {s!r} is not a value of {label}")
            if isinstance(val, str) and val == STAR:
                raise ConstructionError(f"evidence {nid}: '*' cannot be observed")
    both = sorted(set(targets) & query.observed)
    if both:
        raise ConstructionError(f"target is evidence: {', '.join(both)}")
    return Query(tuple(targets), query.evidence, query.likelihoods)


def _target_attributes(kb: MebnKb, label: str) -> tuple[tuple[str, str], ...]:
    ht = kb.hypothesis_types.get(label)
    if ht is not None:
        return ht.attributes
    for a in kb.association_types():
        if a.label == label:
            return a.attributes
    raise ConstructionError(f"unknown hypothesis type {label!r}")


def is_association_label(kb: MebnKb, label: str) -> bool:
    return label not in kb.hypothesis_types and any(a.label == label for a in kb.association_types())


def _check_binding(kb: MebnKb, where: str, instance_id: str, entity_type: str) -> None:
    if not kb.instance_has_type(instance_id, entity_type):
        raise ConstructionError(f"{where}: {instance_id} is not a {entity_type}")


def _product(pools):
    out = [()]
    for pool in pools:
        out = [o + (x,) for o in out for x in pool]
    return out


def _id_key(instance_id: str):
    m = re.match(r"^(\D*)(\d+)$", instance_id)
    return (m.group(1), int(m.group(2))) if m else (instance_id, -1)


def format_posteriors(marginals: Mapping[str, Mapping[str, float]]) -> str:
    """Tab-separated ``node state probability`` lines, nodes sorted."""
    lines = []
    for n in sorted(marginals):
        for s, p in marginals[n].items():
            lines.append(f"{n}\t{s}\t{p:.12g}")
    return "\n".join(lines) + ("\n" if lines else "")
