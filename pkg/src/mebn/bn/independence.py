"""d-separation and query-driven structural pruning."""

from __future__ import annotations

from collections import deque
from typing import Collection, Iterable, Mapping

import numpy as np

from .network import DiscreteNode, Network, NetworkError


def reachable(net: Network, sources: Iterable[str], given: Collection[str]) -> set[str]:
    """Nodes connected to ``sources`` by an active trail given ``given``."""
    given = set(given)
    for n in given:
        net[n]
    anc = set(given) | net.ancestors(given)
    seen: set[tuple[str, bool]] = set()
    out: set[str] = set()
    queue = deque((s, True) for s in sources)  # (node, arrived from a child)
    while queue:
        n, up = queue.popleft()
        if (n, up) in seen:
            continue
        seen.add((n, up))
        if n not in given:
            out.add(n)
        if up and n not in given:
            queue.extend((p, True) for p in net.parents(n))
            queue.extend((c, False) for c in net.children(n))
        elif not up:
            if n not in given:
                queue.extend((c, False) for c in net.children(n))
            if n in anc:
                queue.extend((p, True) for p in net.parents(n))
    return out


def d_separated(net: Network, xs: Iterable[str], ys: Iterable[str], zs: Iterable[str]) -> bool:
    """True iff every trail between ``xs`` and ``ys`` is blocked by ``zs``."""
    xs, ys, zs = set(xs), set(ys), set(zs)
    for n in xs | ys | zs:
        net[n]
    if (xs & ys) or (xs & zs) or (ys & zs):
        raise NetworkError("d_separated: node sets must be disjoint")
    return not (reachable(net, xs, zs) & ys)


def requisite_nodes(
    net: Network,
    targets: Iterable[str],
    evidence: Collection[str],
    soft: Collection[str] = (),
) -> tuple[set[str], set[str]]:
    """Bayes-ball pass for the query P(targets | evidence).

    Returns ``(cpt_nodes, observed_nodes)``: nodes whose CPTs the posterior
    depends on, and hard-evidence nodes whose values it depends on.  Nodes in
    ``soft`` carry likelihood evidence and behave as if they had an observed
    child.
    """
    evidence, soft = set(evidence), set(soft)
    top: set[str] = set()
    bottom: set[str] = set()
    visited: set[str] = set()
    queue = deque((t, True) for t in targets)
    while queue:
        n, from_child = queue.popleft()
        visited.add(n)
        if n in soft and n not in evidence and n not in top:
            from_child = True
        if n in evidence:
            if not from_child and n not in top:
                top.add(n)
                queue.extend((p, True) for p in net.parents(n))
            continue
        if from_child and n not in top:
            top.add(n)
            queue.extend((p, True) for p in net.parents(n))
        if n not in bottom:
            bottom.add(n)
            queue.extend((c, False) for c in net.children(n))
    return top, evidence & visited


def prune_for_query(
    net: Network,
    targets: Iterable[str],
    evidence: Mapping[str, str] | Collection[str] = (),
    soft: Collection[str] = (),
) -> Network:
    """Drop barren and d-separated nodes without changing P(targets | evidence).

    Observed nodes that are kept only as parents of retained nodes become
    roots with a uniform table; their value is fixed by the evidence, so the
    table only contributes a constant.
    """
    targets = list(targets)
    ev = set(evidence)
    for n in list(targets) + sorted(ev) + sorted(soft):
        net[n]
    if set(targets) & ev:
        raise NetworkError(f"target is evidence: {sorted(set(targets) & ev)}")
    cpt_nodes, _ = requisite_nodes(net, targets, ev, soft)
    keep = set(cpt_nodes)
    replace: dict[str, DiscreteNode] = {}
    for n in cpt_nodes:
        for p in net.parents(n):
            if p not in cpt_nodes:
                keep.add(p)
                pn = net[p]
                replace[p] = DiscreteNode(p, pn.states, (), np.full((1, pn.card), 1.0 / pn.card))
    if keep == set(net.node_ids) and not replace:
        return net
    return net.subnetwork(keep, replace)
