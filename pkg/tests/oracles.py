"""Independent oracles for constructed networks.

``mixture_posterior`` rebuilds one association-free network per joint
assignment of the association nodes and mixes their evidence-weighted
posteriors by the association priors.  Tables are filled with plain loops,
not with the library's table assembly.
"""

from __future__ import annotations

import itertools
import random

import numpy as np

from mebn.bn import STAR, DiscreteNode, build_network, exact_query
from mebn.kb import FragmentSpec, MebnKb
from mebn.ssn import ConstructionPolicy, Query, SituationView


def loop_star_extend(frag_cpt, parent_states, child_states):
    cards = [len(s) for s in parent_states]
    out = np.zeros(cards + [len(child_states)])
    for combo in itertools.product(*(range(c) for c in cards)):
        labels = [s[i] for s, i in zip(parent_states, combo)]
        if STAR in labels:
            out[combo + (child_states.index(STAR),)] = 1.0
        else:
            for j, p in enumerate(frag_cpt[combo]):
                out[combo + (j,)] = p
    return out


def hypothesis_network(cn, assignment):
    """Association-free network for one joint association assignment."""
    net = cn.network
    nodes = []
    for nid in net.node_ids:
        if nid in cn.association_nodes:
            continue
        node = net[nid]
        mux = cn.multiplexers.get(nid)
        if mux is None:
            nodes.append(node)
            continue
        labels = [assignment[a] for a in mux.assoc_ids]
        if STAR in labels:
            point = np.zeros(node.card)
            point[node.states.index(STAR)] = 1.0
            nodes.append(DiscreteNode(nid, node.states, (), point))
            continue
        selected = [s.copies[tuple(labels[j] for j in s.assoc_index)] for s in mux.slots]
        table = loop_star_extend(mux.fragment_cpt, [net[p].states for p in selected], node.states)
        nodes.append(DiscreteNode(nid, node.states, tuple(selected), table))
    return build_network(nodes)


def unnormalized(net, targets, evidence, likelihoods):
    """P(targets, evidence) without normalizing, via a joint over targets
    and observed nodes."""
    observed = [n for n in sorted(set(evidence) | set(likelihoods)) if n in net]
    joint = exact_query(net, list(targets) + observed)
    table = joint.table
    for k, n in enumerate(observed):
        ax = len(targets) + k
        states = net[n].states
        if n in evidence:
            w = np.array([1.0 if s == evidence[n] else 0.0 for s in states])
        else:
            w = np.array([likelihoods[n].get(s, 0.0) for s in states])
        shape = [1] * table.ndim
        shape[ax] = len(states)
        table = table * w.reshape(shape)
    return table.sum(axis=tuple(range(len(targets), table.ndim)))


def mixture_posterior(cn, targets, evidence=None, likelihoods=None):
    evidence = dict(evidence or {})
    likelihoods = dict(likelihoods or {})
    net = cn.network
    assoc = list(cn.association_nodes)
    total = None
    for combo in itertools.product(*(net[a].states for a in assoc)):
        assignment = dict(zip(assoc, combo))
        prior = 1.0
        for a, v in assignment.items():
            prior *= float(net[a].cpt[net[a].states.index(v)])
        hnet = hypothesis_network(cn, assignment)
        part = prior * unnormalized(hnet, targets, evidence, likelihoods)
        total = part if total is None else total + part
    return total / total.sum()


# -- star placement ------------------------------------------------------------------

def expected_stars(cn, star_instances=frozenset()):
    """Direct re-statement of the placement rules on the built structure."""
    net = cn.network
    assoc = set(cn.association_nodes)
    desc = net.descendants(assoc)
    cop = {p for y in assoc for c in net.children(y) for p in net.parents(c) if p not in assoc}
    roots = {n for n in net.node_ids if not net.parents(n) and n not in assoc}
    chosen = cn.provenance
    cand = {n for n in roots if cn.query and n not in cn.query.observed
            and any(v in star_instances for _, v in chosen[n].binding)}
    s = set(desc) | cop | cand
    for c in sorted(cop):
        anc = net.ancestors([c]) | {c}
        if not anc & (assoc | (s & roots)):
            s |= {r for r in anc & roots if r not in cn.query.observed}
    s |= net.descendants(s)
    return s - assoc


def active_parents(cn, node_id, assignment):
    """Parents a row actually reads: association nodes plus the selected copies."""
    mux = cn.multiplexers.get(node_id)
    if mux is None:
        return list(assignment)
    labels = [assignment[a] for a in mux.assoc_ids]
    if STAR in labels:
        return list(mux.assoc_ids)
    return list(mux.assoc_ids) + [s.copies[tuple(labels[j] for j in s.assoc_index)] for s in mux.slots]


def assert_star_absorption(cn):
    net = cn.network
    for n in net.node_ids:
        node = net[n]
        for combo in itertools.product(*(range(net[p].card) for p in node.parents)):
            assignment = {p: net[p].states[i] for p, i in zip(node.parents, combo)}
            if any(assignment[p] == STAR for p in active_parents(cn, n, assignment)):
                row = node.cpt[combo]
                assert row[node.states.index(STAR)] == 1.0 and row.sum() == 1.0


# -- random association scenes ----------------------------------------------------

def random_scene_kb(rng: random.Random) -> MebnKb:
    """Company type -> platoon type -> one or two report readings, with
    random cardinalities and tables."""
    kb = MebnKb()
    kb.declare_entity_type("Company", "p")
    kb.declare_entity_type("Unit")
    kb.declare_entity_type("Report")
    kc, ku, kr, ks = (rng.randint(2, 3) for _ in range(4))
    kb.declare_hypothesis_type("CoType", [("p", "Company")], [f"c{i}" for i in range(kc)])
    kb.declare_hypothesis_type("PType", [("u", "Unit")], [f"t{i}" for i in range(ku)])
    kb.declare_hypothesis_type("Obs", [("r", "Report")], [f"o{i}" for i in range(kr)])
    kb.declare_hypothesis_type("Obs2", [("r", "Report")], [f"s{i}" for i in range(ks)])

    def rows(n_rows, k):
        t = np.array([[rng.random() + 0.05 for _ in range(k)] for _ in range(n_rows)])
        return t / t.sum(axis=1, keepdims=True)

    kb.declare_fragment_type(FragmentSpec("Fc", [("p", "Company")], residents=[("CoType", ["p"])],
                                          cpts={"CoType": rows(1, kc)[0]}))
    kb.declare_fragment_type(FragmentSpec("Fu", [("u", "Unit"), ("p", "Company")], inputs=[("CoType", ["p"])],
                                          residents=[("PType", ["u"])], edges=[("CoType", "PType")],
                                          cpts={"PType": rows(kc, ku)}))
    kb.declare_fragment_type(FragmentSpec("Fo", [("r", "Report"), ("u", "Unit")], inputs=[("PType", ["u"])],
                                          residents=[("Obs", ["r"])], edges=[("PType", "Obs")],
                                          cpts={"Obs": rows(ku, kr)}))
    kb.declare_fragment_type(FragmentSpec("Fo2", [("r", "Report"), ("u", "Unit")], inputs=[("PType", ["u"])],
                                          residents=[("Obs2", ["r"])], edges=[("PType", "Obs2")],
                                          cpts={"Obs2": rows(ku, ks)}))
    return kb


def random_scene(rng: random.Random, max_assoc=3, max_cands=4):
    """Random KB, situation, query and policy."""
    kb = random_scene_kb(rng)
    n_co = rng.randint(1, 2)
    n_units = rng.randint(1, 4)
    n_reports = rng.randint(1, 3)
    cos = [f"p{i + 1}" for i in range(n_co)]
    units = [f"u{i + 1}" for i in range(n_units)]
    reports = [f"r{i + 1}" for i in range(n_reports)]
    sit = SituationView().add("Company", *cos).add("Unit", *units).add("Report", *reports)
    n_assoc = 0
    for u in units:
        if n_assoc < max_assoc and rng.random() < 0.35:
            sit.hypothesize("P", u, rng.sample(cos, rng.randint(1, n_co)))
            n_assoc += 1
        else:
            sit.commit("P", u, rng.choice(cos))
    for r in reports:
        if n_assoc < max_assoc and rng.random() < 0.7:
            sit.hypothesize("U", r, rng.sample(units, rng.randint(1, min(max_cands, n_units))))
            n_assoc += 1
        else:
            sit.commit("U", r, rng.choice(units))
    evidence, likelihoods = {}, {}
    for r in reports:
        for label, ht in (("Obs", "o"), ("Obs2", "s")):
            nid = f"{label}({r})"
            values = kb.hypothesis_types[label].values
            roll = rng.random()
            if roll < 0.4:
                evidence[nid] = rng.choice(values)
            elif roll < 0.7:
                w = {v: rng.random() for v in values}
                w["*"] = rng.random()
                likelihoods[nid] = w
    pool = [f"PType({u})" for u in units] + [f"CoType({p})" for p in cos]
    targets = tuple(rng.sample(pool, rng.randint(1, min(2, len(pool)))))
    if not evidence and not likelihoods:
        evidence[f"Obs({reports[0]})"] = kb.hypothesis_types["Obs"].values[0]
    policy = ConstructionPolicy(
        star_priors={"Company": rng.uniform(0.05, 0.9), "Unit": rng.uniform(0.05, 0.9)},
        star_instances=frozenset(rng.sample(cos, rng.randint(0, n_co))),
        assoc_star=rng.uniform(0.02, 0.5),
    )
    return kb, sit, Query(targets, evidence, likelihoods), policy
