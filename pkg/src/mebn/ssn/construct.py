"""Bottom-up construction of situation-specific networks.

A builder expands node instances through their resident fragments.  Parents
that refer to an attribute the child does not bind are resolved through the
fragment's association hypothesis: a committed answer becomes a plain edge,
anything else an association node whose states are the candidates plus
``*``, with one parent copy per candidate and a multiplexer table on the
child.  ``*`` states are then placed and every table is extended.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..bn import STAR, DiscreteNode, Network, build_network, exact_query
from ..bn.independence import prune_for_query
from ..kb.model import AssociationHypothesisType, MebnKb, node_id
from .query import (
    AssociationCandidates,
    ConstructionError,
    Query,
    SituationLike,
    is_association_label,
    parse_node_id,
    resolve_query,
)

DEFAULT_ASSOC_STAR = 0.1
DEFAULT_LAZY_THRESHOLD = 0.5

Enumerator = Callable[[AssociationHypothesisType, tuple[str, ...]], "AssociationCandidates | None"]


@dataclass
class ConstructionPolicy:
    """``star_priors`` override the KB per entity type; ``star_instances``
    lists hypothesized instances whose root nodes carry ``*`` (false-alarm
    mass).  ``assoc_star`` is the ``*`` share of every association prior.
    With no ``candidate_enumerator`` the situation answers association
    queries itself."""

    star_priors: Mapping[str, float] = field(default_factory=dict)
    star_instances: frozenset[str] = frozenset()
    assoc_star: float = DEFAULT_ASSOC_STAR
    lazy_expansion: bool = False
    lazy_threshold: float = DEFAULT_LAZY_THRESHOLD
    candidate_enumerator: Enumerator | None = None

    def validate(self) -> None:
        for et, p in self.star_priors.items():
            if not 0.0 < p < 1.0:
                raise ConstructionError(f"policy: star prior for {et} = {p} not in (0, 1)")
        if not 0.0 < self.assoc_star < 1.0:
            raise ConstructionError(f"policy: assoc_star = {self.assoc_star} not in (0, 1)")
        if not 0.0 < self.lazy_threshold < 1.0:
            raise ConstructionError(f"policy: lazy_threshold = {self.lazy_threshold} not in (0, 1)")


@dataclass(frozen=True)
class ParentSlot:
    """One fragment parent of a child.  ``assoc_index`` picks which of the
    child's association nodes select the copy; ``copies`` maps the selecting
    candidate tuple to a node id (key ``()`` for a plain parent)."""

    label: str
    assoc_index: tuple[int, ...]
    copies: Mapping[tuple[str, ...], str]


@dataclass(frozen=True)
class Multiplexer:
    fragment_cpt: np.ndarray
    assoc_ids: tuple[str, ...]
    slots: tuple[ParentSlot, ...]

    def parent_ids(self) -> tuple[str, ...]:
        return self.assoc_ids + tuple(n for s in self.slots for n in s.copies.values())


@dataclass(frozen=True)
class AssociationNode:
    node_id: str
    label: str
    ident: tuple[str, ...]
    entity_type: str
    candidates: tuple[str, ...]

    @property
    def states(self) -> tuple[str, ...]:
        return self.candidates + (STAR,)


@dataclass(frozen=True)
class Provenance:
    kind: str  # "resident", "association" or "default"
    fragment_id: str
    binding: tuple[tuple[str, str], ...] = ()


@dataclass
class ConstructedNetwork:
    network: Network
    query: Query
    provenance: dict[str, Provenance]
    association_nodes: dict[str, AssociationNode]
    multiplexers: dict[str, Multiplexer]
    star_nodes: frozenset[str]
    truncated: frozenset[str] = frozenset()

    def node_ids(self) -> tuple[str, ...]:
        return self.network.node_ids

    def __len__(self) -> int:
        return len(self.network)


@dataclass
class _Spec:
    node_id: str
    label: str
    ids: tuple[str, ...]
    values: tuple[str, ...]
    fragment_id: str | None = None
    binding: tuple[tuple[str, str], ...] = ()
    mux: Multiplexer | None = None
    default: bool = False

    def parents(self) -> tuple[str, ...]:
        return self.mux.parent_ids() if self.mux else ()


class _Builder:
    def __init__(self, kb: MebnKb, situation: SituationLike, policy: ConstructionPolicy, rng: random.Random | None):
        self.kb = kb
        self.situation = situation
        self.policy = policy
        self.rng = rng
        self.specs: dict[str, _Spec] = {}
        self.assoc: dict[str, AssociationNode] = {}
        self.answers: dict[tuple[str, tuple[str, ...]], AssociationCandidates] = {}
        self.assoc_prov: dict[str, Provenance] = {}
        self.frontier: list[str] = []

    # -- structure --------------------------------------------------------------

    def request(self, label: str, ids: Sequence[str]) -> str:
        nid = node_id(label, ids)
        if nid not in self.specs and nid not in self.assoc:
            ht = self.kb.hypothesis_types.get(label)
            if ht is None:
                raise ConstructionError(f"unknown hypothesis type {label!r}")
            self.specs[nid] = _Spec(nid, label, tuple(ids), ht.values)
            self.frontier.append(nid)
        return nid

    def answer(self, a: AssociationHypothesisType, ident: tuple[str, ...]) -> AssociationCandidates:
        key = (a.label, ident)
        if key not in self.answers:
            enum = self.policy.candidate_enumerator
            ans = enum(a, ident) if enum else self.situation.association_candidates(a.label, ident)
            where = node_id(a.label, ident)
            if ans is None or not ans.candidates:
                raise ConstructionError(f"no association candidates for {where}")
            for c in ans.candidates:
                if not self.kb.instance_has_type(c, a.entity_type):
                    raise ConstructionError(f"candidate {c} for {where} is not a {a.entity_type}")
            self.answers[key] = ans
            if not ans.committed:
                self.assoc[where] = AssociationNode(where, a.label, ident, a.entity_type, ans.candidates)
                self.assoc_prov[where] = Provenance(
                    "association", a.fragment_id, tuple((x, v) for (x, _), v in zip(a.attributes, ident)))
        return self.answers[key]

    def expand(self, nid: str) -> None:
        spec = self.specs[nid]
        if spec.fragment_id is not None:
            return
        frag = self.kb.resident_fragment(spec.label)
        if frag is None:
            raise ConstructionError(f"no fragment has {spec.label} as a resident")
        trigger = frag.node(spec.label)
        binding = dict(zip(trigger.attrs, spec.ids))
        # the whole fragment comes along: every resident bound by this binding
        for label in frag.residents:
            rnode = frag.node(label)
            if not all(a in binding for a in rnode.attrs):
                continue
            rid = self.request(label, [binding[a] for a in rnode.attrs])
            self._define(self.specs[rid], frag, binding)

    def _define(self, spec: _Spec, frag, binding: dict[str, str]) -> None:
        if spec.fragment_id is not None:
            return
        spec.fragment_id = frag.fragment_id
        spec.binding = tuple((a, binding[a]) for a, _ in frag.attributes if a in binding)
        assoc_ids: list[str] = []
        slots = []
        for plabel in frag.parents[spec.label]:
            pnode = frag.node(plabel)
            free = list(dict.fromkeys(a for a in pnode.attrs if a not in binding))
            fixed: dict[str, str] = {}
            hyp: list[tuple[str, tuple[str, ...], str]] = []
            for z in free:
                a = frag.association_for(z)
                if a is None:
                    raise ConstructionError(f"fragment {frag.fragment_id}: attribute {z} is neither bound nor associated")
                ident = tuple(binding[x] for x, _ in a.attributes)
                ans = self.answer(a, ident)
                if ans.committed:
                    fixed[z] = ans.candidates[0]
                else:
                    hyp.append((z, ans.candidates, node_id(a.label, ident)))
            for _, _, aid in hyp:
                if aid not in assoc_ids:
                    assoc_ids.append(aid)
            copies: dict[tuple[str, ...], str] = {}
            for combo in itertools.product(*(c for _, c, _ in hyp)):
                b = dict(binding, **fixed, **{z: v for (z, _, _), v in zip(hyp, combo)})
                copies[combo] = self.request(plabel, [b[a] for a in pnode.attrs])
            index = tuple(assoc_ids.index(aid) for _, _, aid in hyp)
            slots.append(ParentSlot(plabel, index, copies))
        spec.mux = Multiplexer(frag.cpts[spec.label], tuple(assoc_ids), tuple(slots))

    def run(self, observed: set[str], targets: Sequence[str], evidence, likelihoods) -> set[str]:
        truncated: set[str] = set()
        while self.frontier:
            wave, self.frontier = self.frontier, []
            if self.rng is not None:
                self.rng.shuffle(wave)
            if self.policy.lazy_expansion:
                wave = self._lazy_filter(wave, observed, targets, evidence, likelihoods, truncated)
            for nid in wave:
                self.expand(nid)
        return truncated

    def _lazy_filter(self, wave, observed, targets, evidence, likelihoods, truncated):
        candidates = [n for n in wave if self.specs[n].fragment_id is None and n not in observed]
        if not candidates:
            return wave
        for n in candidates:
            self.specs[n].default = True
        net, stars = self.assemble()
        keep = []
        for n in wave:
            if n not in candidates or STAR not in net[n].states:
                keep.append(n)
                continue
            ev = {k: v for k, v in evidence.items() if k in net}
            lk = _likelihood_vectors(net, {k: v for k, v in likelihoods.items() if k in net})
            post = exact_query(net, [n], ev, lk).marginal(n)
            if 1.0 - post[STAR] >= self.policy.lazy_threshold:
                keep.append(n)
            else:
                truncated.add(n)
        for n in candidates:
            if n in keep:
                self.specs[n].default = False
        return keep

    # -- stars and tables -------------------------------------------------------------

    def parents_map(self) -> dict[str, tuple[str, ...]]:
        out = {a: () for a in self.assoc}
        for nid, s in self.specs.items():
            out[nid] = () if (s.mux is None or s.default) else s.parents()
        return out

    def star_set(self, evidence: set[str]) -> set[str]:
        return augment_star(self.parents_map(), set(self.assoc), self._candidate_roots(), evidence)

    def _candidate_roots(self) -> set[str]:
        chosen = self.policy.star_instances
        return {nid for nid, s in self.specs.items() if any(i in chosen for i in s.ids)}

    def root_star_prior(self, spec: _Spec) -> float:
        et = self.kb.hypothesis_types[spec.label].attributes[0][1]
        return self.policy.star_priors.get(et, self.kb.star_prior(et))

    def assemble(self, evidence: set[str] = frozenset()) -> tuple[Network, set[str]]:
        stars = self.star_set(set(evidence))
        nodes = []
        for aid, a in self.assoc.items():
            k = len(a.candidates)
            prior = [(1.0 - self.policy.assoc_star) / k] * k + [self.policy.assoc_star]
            nodes.append(DiscreteNode(aid, a.states, (), np.array(prior)))
        states = {aid: a.states for aid, a in self.assoc.items()}
        for nid, s in self.specs.items():
            states[nid] = s.values + ((STAR,) if nid in stars else ())
        for nid, s in self.specs.items():
            if s.mux is None or s.default:
                nodes.append(DiscreteNode(nid, states[nid], (), self._default_prior(s, states[nid])))
                continue
            if not s.mux.slots:
                table = star_root_prior(s.mux.fragment_cpt, STAR in states[nid], self.root_star_prior(s))
                nodes.append(DiscreteNode(nid, states[nid], (), table))
                continue
            assoc = [(aid, states[aid]) for aid in s.mux.assoc_ids]
            parent_ids, table = assemble_multiplexer_cpt(s.mux.fragment_cpt, states[nid], assoc, s.mux.slots, states)
            nodes.append(DiscreteNode(nid, states[nid], parent_ids, table))
        return build_network(nodes), stars

    def _default_prior(self, spec: _Spec, states: tuple[str, ...]) -> np.ndarray:
        k = len(spec.values)
        if STAR in states:
            p = self.root_star_prior(spec)
            return np.array([(1.0 - p) / k] * k + [p])
        return np.full(k, 1.0 / k)


def augment_star(
    parents: Mapping[str, Sequence[str]],
    association_nodes: set[str],
    candidate_roots: set[str],
    evidence: set[str] = frozenset(),
) -> set[str]:
    """Nodes whose state space must contain ``*``.

    Descendants of association nodes and co-parents of association nodes get
    ``*``; every co-parent needs some ``*``-carrying ancestor, supplied by its
    non-evidence root ancestors when none exists; finally ``*`` is closed
    under descent.  ``candidate_roots`` adds hypothesized roots.  Raises
    :class:`ConstructionError` when a co-parent has no eligible ancestor.
    """
    children: dict[str, list[str]] = {n: [] for n in parents}
    for n, ps in parents.items():
        for p in ps:
            children[p].append(n)

    def descendants(seeds):
        seen, stack = set(), list(seeds)
        while stack:
            n = stack.pop()
            for c in children[n]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def ancestors_or_self(n):
        seen, stack = {n}, [n]
        while stack:
            for p in parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    star = set(descendants(association_nodes))
    coparents = {p for y in association_nodes for c in children[y] for p in parents[c] if p not in association_nodes}
    star |= coparents
    roots = {n for n in parents if not parents[n] and n not in association_nodes}
    sources = set(association_nodes) | {r for r in candidate_roots if r in roots and r not in evidence}
    star |= sources - set(association_nodes)
    for c in sorted(coparents):
        anc = ancestors_or_self(c)
        if anc & (sources | (star & roots)):
            continue
        fix = sorted(r for r in anc & roots if r not in evidence)
        if not fix:
            raise ConstructionError(f"no ancestor of co-parent {c} can carry '*'")
        star.update(fix)
        sources.update(fix)
    star |= descendants(star | set(association_nodes))
    return star - set(association_nodes)


def star_root_prior(prior: np.ndarray, with_star: bool, star_prior: float) -> np.ndarray:
    """Root table: ``star_prior`` on ``*`` and the rest scaling the declared prior."""
    prior = np.asarray(prior, dtype=np.float64)
    if not with_star:
        return prior.copy()
    return np.concatenate([prior * (1.0 - star_prior), [star_prior]])


def star_extend(fragment_cpt: np.ndarray, parent_states: Sequence[Sequence[str]], child_states: Sequence[str]) -> np.ndarray:
    """Embed a fragment table into parent/child state spaces that may carry ``*``.

    Rows with any ``*`` parent are a point mass on ``*``; elsewhere the
    fragment distribution is used with 0 on ``*``.
    """
    cards = [len(s) for s in parent_states]
    base = [len(s) - (STAR in s) for s in parent_states]
    if tuple(base) != fragment_cpt.shape[:-1] or len(child_states) - (STAR in child_states) != fragment_cpt.shape[-1]:
        raise ConstructionError(
            f"state spaces {base}+{len(child_states)} do not match fragment table {fragment_cpt.shape}")
    out = np.zeros(cards + [len(child_states)])
    out[tuple(slice(0, b) for b in base) + (slice(0, fragment_cpt.shape[-1]),)] = fragment_cpt
    for ax, s in enumerate(parent_states):
        if STAR in s:
            if STAR not in child_states:
                raise ConstructionError("a '*' parent requires a '*' child state")
            idx = [slice(None)] * (len(cards) + 1)
            idx[ax] = len(s) - 1
            sub = out[tuple(idx)]
            sub[...] = 0.0
            sub[..., -1] = 1.0
    return out


def assemble_multiplexer_cpt(
    fragment_cpt: np.ndarray,
    child_states: Sequence[str],
    assoc: Sequence[tuple[str, Sequence[str]]],
    slots: Sequence[ParentSlot],
    states: Mapping[str, Sequence[str]],
) -> tuple[tuple[str, ...], np.ndarray]:
    """Table of a child whose parents are selected by association nodes.

    Parents are ordered association nodes first, then each slot's copies.
    For a row with every association at a candidate, the fragment table is
    applied to the selected copies and the other copies are ignored; a row
    with any association at ``*`` is a point mass on ``*``.
    """
    assoc_ids = tuple(a for a, _ in assoc)
    rest = [n for s in slots for n in s.copies.values()]
    parent_ids = assoc_ids + tuple(rest)
    cards = [len(states[p]) for p in parent_ids]
    out = np.zeros(cards + [len(child_states)])
    for combo in itertools.product(*(range(len(st)) for _, st in assoc)):
        labels = [st[i] for (_, st), i in zip(assoc, combo)]
        view = out[combo] if combo else out
        if STAR in labels:
            if STAR not in child_states:
                raise ConstructionError("association '*' requires a '*' child state")
            view[..., -1] = 1.0
            continue
        selected = []
        for s in slots:
            key = tuple(labels[j] for j in s.assoc_index)
            if key not in s.copies:
                raise ConstructionError(f"missing parent copy of {s.label} for {key}")
            selected.append(s.copies[key])
        table = star_extend(fragment_cpt, [states[n] for n in selected], child_states)
        shape = [1] * len(rest) + [len(child_states)]
        pos = {n: i for i, n in enumerate(rest)}
        for n in selected:
            shape[pos[n]] = len(states[n])
        view[...] = table.reshape(shape)
    return parent_ids, out


def _likelihood_vectors(net: Network, likelihoods: Mapping[str, Mapping[str, float]]) -> dict[str, list[float]]:
    return {n: [float(w.get(s, 0.0)) for s in net[n].states] for n, w in likelihoods.items()}


def construct_ssn(
    kb: MebnKb,
    situation: SituationLike,
    query: Query,
    policy: ConstructionPolicy | None = None,
    frontier_seed: int | None = None,
) -> ConstructedNetwork:
    """Build the (unpruned) network for ``query``.

    ``frontier_seed`` shuffles the order in which frontier nodes are
    expanded; the result does not depend on it.
    """
    policy = policy or ConstructionPolicy()
    policy.validate()
    query = resolve_query(kb, situation, query)
    b = _Builder(kb, situation, policy, random.Random(frontier_seed) if frontier_seed is not None else None)
    seeds = list(query.targets) + sorted(query.evidence) + sorted(query.likelihoods)
    assoc_targets = []
    for nid in seeds:
        label, ids = parse_node_id(nid)
        if is_association_label(kb, label):
            assoc_targets.append(nid)
        else:
            b.request(label, ids)
    truncated = b.run(query.observed, query.targets, query.evidence, query.likelihoods)
    for nid in assoc_targets:
        if nid not in b.assoc:
            raise ConstructionError(f"association {nid} is not hypothetical for this query")
    net, stars = b.assemble(query.observed)
    prov: dict[str, Provenance] = dict(b.assoc_prov)
    for nid, s in b.specs.items():
        if s.default or s.fragment_id is None:
            prov[nid] = Provenance("default", s.fragment_id or "", s.binding)
        else:
            prov[nid] = Provenance("resident", s.fragment_id, s.binding)
    muxes = {nid: s.mux for nid, s in b.specs.items() if s.mux is not None and not s.default and s.mux.assoc_ids}
    return ConstructedNetwork(net, query, prov, dict(b.assoc), muxes, frozenset(stars), frozenset(truncated))


def minimalize(cn: ConstructedNetwork, query: Query | None = None) -> ConstructedNetwork:
    """Prune to the requisite nodes for the query; re-running removes nothing."""
    query = query or cn.query
    present = cn.network
    net = prune_for_query(present, query.targets, {k: v for k, v in query.evidence.items() if k in present},
                          soft={k for k in query.likelihoods if k in present})
    if net is cn.network:
        return cn
    keep = set(net.node_ids)
    return ConstructedNetwork(
        net,
        query,
        {k: v for k, v in cn.provenance.items() if k in keep},
        {k: v for k, v in cn.association_nodes.items() if k in keep},
        {k: v for k, v in cn.multiplexers.items() if k in keep and net[k].parents == cn.network[k].parents},
        frozenset(cn.star_nodes & keep),
        frozenset(cn.truncated & keep),
    )
