"""The evolving hypothesis population."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from ..kb.model import IdGenerator, MebnKb
from ..ssn.query import AssociationCandidates, parse_node_id

AssocKey = tuple[str, tuple[str, ...]]


@dataclass
class SituationModel:
    """Live instances, association answers and accumulated evidence.

    ``associations`` maps ``(label, identifying ids)`` to the candidate set
    the network builder will see; committed entries are definite bindings.
    ``features`` holds per-instance domain data (positions, member report
    ids under ``"members"``).  ``unassociated`` collects raw reports whose
    hypotheses were pruned.
    """

    id_generator: IdGenerator
    instances: dict[str, list[str]] = field(default_factory=dict)
    features: dict[str, dict[str, Any]] = field(default_factory=dict)
    associations: dict[AssocKey, AssociationCandidates] = field(default_factory=dict)
    evidence: dict[str, str] = field(default_factory=dict)
    likelihoods: dict[str, dict[str, float]] = field(default_factory=dict)
    evidence_log: list[tuple[int, str, str]] = field(default_factory=list)
    star_beliefs: dict[str, float] = field(default_factory=dict)
    estimates: dict[str, dict[str, float]] = field(default_factory=dict)
    unassociated: list[Any] = field(default_factory=list)
    batch_index: int = 0

    @classmethod
    def empty(cls, kb: MebnKb) -> "SituationModel":
        gen = IdGenerator()
        for e in kb.entity_types.values():
            gen.register(e.label, e.prefix)
        return cls(gen, {e: [] for e in kb.entity_types})

    def copy(self) -> "SituationModel":
        out = copy.deepcopy(self)
        return out

    # -- view used by network construction ----------------------------------------

    def instances_of(self, entity_type: str) -> list[str]:
        return list(self.instances.get(entity_type, ()))

    def has_instance(self, instance_id: str) -> bool:
        return instance_id in self._owner_type()

    def association_candidates(self, label: str, ident: tuple[str, ...]) -> AssociationCandidates | None:
        return self.associations.get((label, tuple(ident)))

    def entity_type_of(self, instance_id: str) -> str:
        return self._owner_type()[instance_id]

    def _owner_type(self) -> dict[str, str]:
        return {i: et for et, ids in self.instances.items() for i in ids}

    def all_instances(self) -> list[str]:
        return [i for ids in self.instances.values() for i in ids]

    # -- mutation ---------------------------------------------------------------------

    def new_id(self, entity_type: str) -> str:
        return self.id_generator.new(entity_type)

    def add_instance(self, entity_type: str, instance_id: str, **features) -> None:
        if self.has_instance(instance_id):
            raise ValueError(f"instance {instance_id} already exists")
        self.id_generator.observe(entity_type, instance_id)
        self.instances.setdefault(entity_type, []).append(instance_id)
        self.features[instance_id] = dict(features)

    def set_association(self, label: str, ident: Iterable[str], candidates: Iterable[str], committed: bool = False):
        ident = tuple(ident)
        for i in ident + tuple(candidates):
            if not self.has_instance(i):
                raise ValueError(f"association {label}{ident} references unknown instance {i}")
        self.associations[(label, ident)] = AssociationCandidates(tuple(candidates), committed)

    def observe(self, node: str, state: str) -> None:
        self._check_node(node)
        self.evidence[node] = state
        self.evidence_log.append((self.batch_index, node, state))

    def observe_likelihood(self, node: str, weights: dict[str, float]) -> None:
        self._check_node(node)
        self.likelihoods[node] = dict(weights)
        text = " ".join(f"{k}={v:.6g}" for k, v in weights.items())
        self.evidence_log.append((self.batch_index, node, text))

    def _check_node(self, node: str) -> None:
        _, ids = parse_node_id(node)
        for i in ids:
            if not self.has_instance(i):
                raise ValueError(f"evidence {node} references unknown instance {i}")

    def dependents(self, instance_id: str) -> set[str]:
        """Instances whose committed association points at ``instance_id``."""
        return {i for (label, ident), a in self.associations.items()
                if a.committed and a.candidates[0] == instance_id for i in ident}

    def remove_instances(self, ids: Iterable[str]) -> list[str]:
        """Remove instances and, transitively, everything left without a
        referent: instances committed to a removed one, and instances whose
        hypothetical association lost every candidate (only "*" remains).

        Returns the removed ids in removal order.  Their evidence is dropped
        and member reports go back to the unassociated pool.
        """
        todo = list(ids)
        removed: list[str] = []
        gone: set[str] = set()
        while todo:
            while todo:
                i = todo.pop(0)
                if i in gone or not self.has_instance(i):
                    continue
                gone.add(i)
                removed.append(i)
                todo.extend(sorted(self.dependents(i) - gone, key=id_sort_key))
                self.instances[self.entity_type_of(i)].remove(i)
                feats = self.features.pop(i, {})
                self.unassociated.extend(feats.get("members", ()))
                self.star_beliefs.pop(i, None)
            for key in list(self.associations):
                label, ident = key
                a = self.associations[key]
                if gone & set(ident):
                    del self.associations[key]
                    continue
                keep = tuple(c for c in a.candidates if c not in gone)
                if not keep:
                    del self.associations[key]
                    todo.extend(ident)
                elif keep != a.candidates:
                    self.associations[key] = AssociationCandidates(keep, a.committed)
        for table in (self.evidence, self.likelihoods, self.estimates):
            for node in list(table):
                if gone & set(parse_node_id(node)[1]):
                    del table[node]
        return removed

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready snapshot.  Member reports are stored by ``report_id``
        and the unassociated pool is not kept."""

        def feats(d):
            out = {}
            for k, v in d.items():
                if k == "members":
                    v = [getattr(m, "report_id", m) for m in v]
                elif isinstance(v, tuple):
                    v = list(v)
                out[k] = v
            return out

        return {
            "counters": self.id_generator.counters,
            "prefixes": self.id_generator.prefixes,
            "instances": {et: list(ids) for et, ids in self.instances.items()},
            "features": {i: feats(f) for i, f in self.features.items()},
            "associations": [
                {"label": label, "ident": list(ident), "candidates": list(a.candidates), "committed": a.committed}
                for (label, ident), a in sorted(self.associations.items())
            ],
            "evidence": dict(self.evidence),
            "likelihoods": {k: dict(v) for k, v in self.likelihoods.items()},
            "star_beliefs": dict(self.star_beliefs),
            "estimates": {k: dict(v) for k, v in self.estimates.items()},
            "batch_index": self.batch_index,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SituationModel":
        try:
            gen = IdGenerator(data["prefixes"], data["counters"])
            sit = cls(gen, {et: list(ids) for et, ids in data["instances"].items()})
            for i, f in data["features"].items():
                sit.features[i] = {k: tuple(v) if isinstance(v, list) else v for k, v in f.items()}
            for a in data["associations"]:
                sit.associations[(a["label"], tuple(a["ident"]))] = AssociationCandidates(
                    tuple(a["candidates"]), bool(a["committed"]))
            sit.evidence = dict(data["evidence"])
            sit.likelihoods = {k: dict(v) for k, v in data["likelihoods"].items()}
            sit.star_beliefs = dict(data["star_beliefs"])
            sit.estimates = {k: dict(v) for k, v in data["estimates"].items()}
            sit.batch_index = int(data.get("batch_index", 0))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValueError(f"malformed situation data: {exc}") from None
        return sit

    def components(self) -> list[list[str]]:
        """Instances grouped by association links, each group sorted, groups
        ordered by their first member."""
        parent = {i: i for i in self.all_instances()}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (label, ident), a in sorted(self.associations.items()):
            ids = [i for i in ident + a.candidates if i in parent]
            for x in ids[1:]:
                ra, rb = find(ids[0]), find(x)
                if ra != rb:
                    parent[max(ra, rb, key=id_sort_key)] = min(ra, rb, key=id_sort_key)
        groups: dict[str, list[str]] = {}
        for i in parent:
            groups.setdefault(find(i), []).append(i)
        out = [sorted(g, key=id_sort_key) for g in groups.values()]
        return sorted(out, key=lambda g: id_sort_key(g[0]))


def id_sort_key(instance_id: str):
    head = instance_id.rstrip("0123456789")
    tail = instance_id[len(head):]
    return (head, int(tail) if tail else -1)
