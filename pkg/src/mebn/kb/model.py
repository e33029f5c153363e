"""Knowledge-base data model: entity types, hypothesis types and fragments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..bn.network import NORMALIZATION_TOL, STAR, CycleError, CptError, normalize_rows

DEFAULT_STAR_PRIOR = 0.5


class KbError(ValueError):
    """Invalid knowledge-base declaration."""


@dataclass(frozen=True)
class EntityType:
    label: str
    prefix: str


@dataclass(frozen=True)
class HypothesisType:
    label: str
    attributes: tuple[tuple[str, str], ...]  # (attribute name, entity type label)
    values: tuple[str, ...]

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.attributes)

    @property
    def entity_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.attributes)


@dataclass(frozen=True)
class HypothesisInstance:
    hypothesis_type: HypothesisType
    bindings: tuple[str, ...]
    instance_id: str


class IdGenerator:
    """Issues ``<prefix><n>`` identifiers per entity type; never reissues."""

    def __init__(self, prefixes: Mapping[str, str] | None = None, counters: Mapping[str, int] | None = None):
        self._prefixes = dict(prefixes or {})
        self._counters = dict(counters or {})

    def register(self, entity_type: str, prefix: str) -> None:
        self._prefixes[entity_type] = prefix
        self._counters.setdefault(entity_type, 0)

    def peek(self, entity_type: str) -> str:
        return f"{self._prefixes[entity_type]}{self._counters.get(entity_type, 0) + 1}"

    def new(self, entity_type: str) -> str:
        if entity_type not in self._prefixes:
            raise KbError(f"unknown entity type {entity_type!r}")
        self._counters[entity_type] = self._counters.get(entity_type, 0) + 1
        return f"{self._prefixes[entity_type]}{self._counters[entity_type]}"

    def observe(self, entity_type: str, instance_id: str) -> None:
        """Advance the counter past an externally supplied id."""
        prefix = self._prefixes[entity_type]
        tail = instance_id[len(prefix):]
        if instance_id.startswith(prefix) and tail.isdigit():
            self._counters[entity_type] = max(self._counters.get(entity_type, 0), int(tail))

    def copy(self) -> "IdGenerator":
        return IdGenerator(self._prefixes, self._counters)

    @property
    def counters(self) -> dict[str, int]:
        return dict(self._counters)

    @property
    def prefixes(self) -> dict[str, str]:
        return dict(self._prefixes)


@dataclass(frozen=True)
class FragmentNode:
    label: str
    attrs: tuple[str, ...]  # fragment attribute names, positional per hypothesis type
    is_input: bool


@dataclass(frozen=True)
class AssociationHypothesisType:
    fragment_id: str
    label: str
    target_attribute: str
    entity_type: str
    attributes: tuple[tuple[str, str], ...]  # identifying attributes (never the target)
    conditioned: tuple[str, ...]  # resident labels whose distribution is conditioned on it

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.label, tuple(t for _, t in self.attributes))


@dataclass
class FragmentSpec:
    """Declaration input for :meth:`MebnKb.declare_fragment_type`.

    ``cpts`` maps a resident label to either a flat probability list (roots),
    a list of ``(parent_assignment, probabilities)`` named rows, or an array
    of shape ``parent cards + (card,)``.
    """

    fragment_id: str
    attributes: Sequence[tuple[str, str]]
    inputs: Sequence[tuple[str, Sequence[str]]] = ()
    residents: Sequence[tuple[str, Sequence[str]]] = ()
    edges: Sequence[tuple[str, str]] = ()
    cpts: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class FragmentType:
    fragment_id: str
    attributes: tuple[tuple[str, str], ...]
    nodes: tuple[FragmentNode, ...]
    parents: Mapping[str, tuple[str, ...]]  # label -> ordered parent labels
    cpts: Mapping[str, np.ndarray]  # resident label -> array(parent cards + (card,))
    associations: tuple[AssociationHypothesisType, ...]

    def node(self, label: str) -> FragmentNode:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(label)

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(n.label for n in self.nodes if n.is_input)

    @property
    def residents(self) -> tuple[str, ...]:
        return tuple(n.label for n in self.nodes if not n.is_input)

    def attribute_type(self, name: str) -> str:
        return dict(self.attributes)[name]

    def association_for(self, attr: str) -> AssociationHypothesisType | None:
        for a in self.associations:
            if a.target_attribute == attr:
                return a
        return None

    def edges(self) -> list[tuple[str, str]]:
        return [(p, c) for c, ps in self.parents.items() for p in ps]


def derive_association_hypotheses(
    attributes: Sequence[tuple[str, str]],
    nodes: Sequence[FragmentNode],
    parents: Mapping[str, Sequence[str]],
    fragment_id: str = "",
) -> tuple[AssociationHypothesisType, ...]:
    """One association type per fragment attribute ``z`` referred to by a
    parent of some resident that does not itself refer to ``z``."""
    by_label = {n.label: n for n in nodes}
    out = []
    for z, z_type in attributes:
        conditioned = [
            n.label
            for n in nodes
            if not n.is_input
            and z not in n.attrs
            and any(z in by_label[p].attrs for p in parents.get(n.label, ()))
        ]
        if not conditioned:
            continue
        common = set.intersection(*(set(by_label[c].attrs) for c in conditioned))
        ident = tuple((a, t) for a, t in attributes if a in common)
        if not ident:
            raise KbError(
                f"fragment {fragment_id}: association on {z!r} has no identifying attributes "
                f"shared by its conditioned nodes {conditioned}"
            )
        out.append(AssociationHypothesisType(fragment_id, z.upper(), z, z_type, ident, tuple(conditioned)))
    return tuple(out)


def _fragment_graph_order(labels: Sequence[str], parents: Mapping[str, Sequence[str]], fid: str) -> None:
    state: dict[str, int] = {}

    def visit(n, path):
        state[n] = 1
        for p in parents.get(n, ()):
            if state.get(p) == 1:
                cyc = path[path.index(p):] + [p]
                raise CycleError([f"{fid}:{x}" for x in cyc])
            if p not in state:
                visit(p, path + [p])
        state[n] = 2

    for n in labels:
        if n not in state:
            visit(n, [n])


class MebnKb:
    """Hypothesis types and fragment types, plus instance id issuance."""

    def __init__(self):
        self.entity_types: dict[str, EntityType] = {}
        self.hypothesis_types: dict[str, HypothesisType] = {}
        self.fragments: dict[str, FragmentType] = {}
        self.star_priors: dict[str, float] = {}
        self.id_generator = IdGenerator()
        self._frozen = False

    # -- declarations -------------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise KbError("knowledge base is frozen")

    def freeze(self) -> "MebnKb":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def declare_entity_type(self, label: str, prefix: str | None = None) -> "MebnKb":
        self._check_mutable()
        if label in self.entity_types:
            raise KbError(f"duplicate entity type {label!r}")
        if not label or not label.isidentifier():
            raise KbError(f"invalid entity type label {label!r}")
        prefix = prefix or label[0].lower()
        if any(e.prefix == prefix for e in self.entity_types.values()):
            raise KbError(f"entity type {label!r}: id prefix {prefix!r} already in use")
        self.entity_types[label] = EntityType(label, prefix)
        self.id_generator.register(label, prefix)
        return self

    def declare_hypothesis_type(
        self, label: str, attributes: Sequence[tuple[str, str]], values: Sequence[str]
    ) -> "MebnKb":
        self._check_mutable()
        if label in self.hypothesis_types:
            raise KbError(f"duplicate hypothesis type {label!r}")
        if not attributes:
            raise KbError(f"hypothesis type {label!r} needs at least one identifying attribute")
        if not values:
            raise KbError(f"hypothesis type {label!r} needs a non-empty value set")
        names = [a for a, _ in attributes]
        if len(set(names)) != len(names):
            raise KbError(f"hypothesis type {label!r}: duplicate attribute names")
        if len(set(values)) != len(values):
            raise KbError(f"hypothesis type {label!r}: duplicate values")
        if STAR in values:
            raise KbError(f"hypothesis type {label!r}: {STAR!r} is reserved")
        for _, t in attributes:
            if t not in self.entity_types:
                raise KbError(f"hypothesis type {label!r}: unknown entity type {t!r}")
        self.hypothesis_types[label] = HypothesisType(label, tuple(map(tuple, attributes)), tuple(values))
        return self

    def set_star_prior(self, entity_type: str, p: float) -> "MebnKb":
        self._check_mutable()
        if entity_type not in self.entity_types:
            raise KbError(f"star_prior: unknown entity type {entity_type!r}")
        if not 0.0 < p < 1.0:
            raise KbError(f"star_prior for {entity_type}: {p} not in (0, 1)")
        if entity_type in self.star_priors and self.star_priors[entity_type] != p:
            raise KbError(f"conflicting star_prior for {entity_type}")
        self.star_priors[entity_type] = p
        return self

    def star_prior(self, entity_type: str) -> float:
        return self.star_priors.get(entity_type, DEFAULT_STAR_PRIOR)

    def declare_fragment_type(self, spec: FragmentSpec) -> "MebnKb":
        self._check_mutable()
        self.fragments[spec.fragment_id] = self.check_fragment(spec)
        return self

    def check_fragment(self, spec: FragmentSpec) -> FragmentType:
        """Validate a fragment declaration and derive its association types."""
        fid = spec.fragment_id
        if fid in self.fragments:
            raise KbError(f"duplicate fragment {fid!r}")
        attrs = tuple(tuple(a) for a in spec.attributes)
        if len({a for a, _ in attrs}) != len(attrs):
            raise KbError(f"fragment {fid}: duplicate fragment attributes")
        for a, t in attrs:
            if t not in self.entity_types:
                raise KbError(f"fragment {fid}: attribute {a} has unknown entity type {t!r}")
        attr_types = dict(attrs)
        if not spec.residents:
            raise KbError(f"fragment {fid}: needs at least one resident node")

        nodes: list[FragmentNode] = []
        for role, decls in (("input", spec.inputs), ("resident", spec.residents)):
            for label, node_attrs in decls:
                ht = self.hypothesis_types.get(label)
                if ht is None:
                    raise KbError(f"fragment {fid}: unknown hypothesis type {label!r}")
                if any(n.label == label for n in nodes):
                    raise KbError(f"fragment {fid}: hypothesis type {label} appears twice")
                node_attrs = tuple(node_attrs)
                if len(node_attrs) != len(ht.attributes):
                    raise KbError(
                        f"fragment {fid}: {label} maps {len(node_attrs)} attributes, "
                        f"type declares {len(ht.attributes)} (correspondence must be total)"
                    )
                for (aname, atype), fa in zip(ht.attributes, node_attrs):
                    if fa not in attr_types:
                        raise KbError(f"fragment {fid}: {label}.{aname} maps to unknown fragment attribute {fa!r}")
                    if attr_types[fa] != atype:
                        raise KbError(
                            f"fragment {fid}: type mismatch, {label}.{aname} is {atype} "
                            f"but fragment attribute {fa} is {attr_types[fa]}"
                        )
                nodes.append(FragmentNode(label, node_attrs, role == "input"))
        labels = [n.label for n in nodes]

        parents: dict[str, list[str]] = {n.label: [] for n in nodes}
        for p, c in spec.edges:
            if p not in parents or c not in parents:
                raise KbError(f"fragment {fid}: edge {p} -> {c} references an undeclared node")
            if p in parents[c]:
                raise KbError(f"fragment {fid}: duplicate edge {p} -> {c}")
            parents[c].append(p)
        for n in nodes:
            if n.is_input and parents[n.label]:
                raise KbError(f"fragment {fid}: input must be root, {n.label} has parents {parents[n.label]}")
        _fragment_graph_order(labels, parents, fid)

        cpts: dict[str, np.ndarray] = {}
        for n in nodes:
            if n.is_input:
                if n.label in spec.cpts:
                    raise KbError(f"fragment {fid}: input node {n.label} cannot carry a local distribution")
                continue
            if n.label not in spec.cpts:
                raise KbError(f"fragment {fid}: missing local distribution for {n.label}")
            cpts[n.label] = self._coerce_local(fid, n.label, parents[n.label], spec.cpts[n.label])
        extra = set(spec.cpts) - set(labels)
        if extra:
            raise KbError(f"fragment {fid}: local distribution for undeclared node(s) {sorted(extra)}")

        parents_t = {k: tuple(v) for k, v in parents.items()}
        assocs = derive_association_hypotheses(attrs, nodes, parents_t, fid)
        for a in assocs:
            if a.label in self.hypothesis_types:
                raise KbError(f"fragment {fid}: association label {a.label} clashes with a hypothesis type")
        return FragmentType(fid, attrs, tuple(nodes), parents_t, cpts, assocs)

    def _coerce_local(self, fid: str, label: str, parents: Sequence[str], raw) -> np.ndarray:
        ht = self.hypothesis_types[label]
        pvals = [self.hypothesis_types[p].values for p in parents]
        shape = tuple(len(v) for v in pvals) + (len(ht.values),)
        where = f"{fid}:{label}"
        if _is_named_rows(raw):
            table = np.full(shape, np.nan)
            for assignment, probs in raw:
                assignment = dict(assignment)
                if set(assignment) != set(parents):
                    raise KbError(f"fragment {fid}: cpt row for {label} names parents {sorted(assignment)}, expected {list(parents)}")
                try:
                    idx = tuple(pv.index(assignment[p]) for p, pv in zip(parents, pvals))
                except ValueError:
                    raise KbError(f"fragment {fid}: cpt row for {label} uses an unknown parent state {assignment}") from None
                if len(probs) != len(ht.values):
                    raise KbError(f"fragment {fid}: cpt row for {label} has {len(probs)} entries, expected {len(ht.values)}")
                if not np.all(np.isnan(table[idx])):
                    raise KbError(f"fragment {fid}: duplicate cpt row for {label} at {assignment}")
                table[idx] = probs
            missing = np.argwhere(np.isnan(table[..., 0]))
            if len(missing):
                first = {p: pv[i] for p, pv, i in zip(parents, pvals, missing[0])}
                raise KbError(f"fragment {fid}: missing cpt row for {label} at {first}")
        else:
            table = np.asarray(raw, dtype=np.float64)
            rows = int(np.prod(shape[:-1]))
            if table.size != rows * shape[-1]:
                raise KbError(f"fragment {fid}: cpt for {label} has {table.size} entries, expected {rows * shape[-1]}")
            table = table.reshape(shape)
        try:
            table = normalize_rows(table, where, NORMALIZATION_TOL)
        except CptError as exc:
            raise KbError(f"fragment {fid}: {exc}") from None
        table.setflags(write=False)
        return table

    # -- instances ------------------------------------------------------------

    def create_instance(self, entity_type: str) -> str:
        return self.id_generator.new(entity_type)

    def fragment_instance(self, fragment_id: str, binding: Mapping[str, str]) -> "FragmentInstance":
        frag = self.fragments[fragment_id]
        missing = [a for a, _ in frag.attributes if a not in binding]
        if missing:
            raise KbError(f"fragment {fragment_id}: binding missing {missing}")
        for a, t in frag.attributes:
            if not self.instance_has_type(binding[a], t):
                raise KbError(f"fragment {fragment_id}: {a}={binding[a]} is not a {t}")
        return FragmentInstance(frag, dict(binding))

    def instance_has_type(self, instance_id: str, entity_type: str) -> bool:
        prefix = self.entity_types[entity_type].prefix
        tail = instance_id[len(prefix):]
        return instance_id.startswith(prefix) and tail.isdigit()

    def entity_type_of(self, instance_id: str) -> str:
        best = None
        for e in self.entity_types.values():
            tail = instance_id[len(e.prefix):]
            if instance_id.startswith(e.prefix) and tail.isdigit():
                if best is None or len(e.prefix) > len(best.prefix):
                    best = e
        if best is None:
            raise KbError(f"instance id {instance_id!r} matches no entity type")
        return best.label

    # -- lookup ---------------------------------------------------------------

    def resident_fragment(self, label: str) -> FragmentType | None:
        for f in self.fragments.values():
            if label in f.residents:
                return f
        return None

    def association_types(self) -> list[AssociationHypothesisType]:
        return [a for f in self.fragments.values() for a in f.associations]


@dataclass(frozen=True)
class FragmentInstance:
    fragment_type: FragmentType
    binding: Mapping[str, str]

    def node_ids(self) -> list[str]:
        return [node_id(n.label, (self.binding[a] for a in n.attrs)) for n in self.fragment_type.nodes]

    def local_distribution(self, label: str) -> np.ndarray:
        # identical for every binding: instances share their type's tables
        return self.fragment_type.cpts[label]


def node_id(label: str, ids: Iterable[str]) -> str:
    return f"{label}({','.join(ids)})"


def _is_named_rows(raw) -> bool:
    if isinstance(raw, np.ndarray) or not isinstance(raw, (list, tuple)) or not raw:
        return False
    first = raw[0]
    return isinstance(first, tuple) and len(first) == 2 and isinstance(first[0], Mapping)
