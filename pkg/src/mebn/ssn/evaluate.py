"""Posterior evaluation of constructed networks."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..bn import STAR, JointQueryResult, exact_query
from .construct import ConstructedNetwork, _likelihood_vectors
from .query import Query


@dataclass
class Posterior:
    marginals: dict[str, dict[str, float]]
    star_posteriors: dict[str, float]
    joint: JointQueryResult | None = None
    node_count: int = 0
    meta: dict = field(default_factory=dict)


def evaluate_query(ssn: ConstructedNetwork, query: Query | None = None, joint: bool = False) -> Posterior:
    """Target marginals plus P(*) for every ``*``-carrying root and every
    association node of ``ssn``.

    Propagates :class:`~mebn.bn.InconsistentEvidenceError`.
    """
    query = query or ssn.query
    net = ssn.network
    # pruning may drop observed nodes that cannot influence the targets
    ev = {k: v for k, v in query.evidence.items() if k in net}
    lk = _likelihood_vectors(net, {k: v for k, v in query.likelihoods.items() if k in net})
    marg = {t: exact_query(net, [t], ev, lk).marginal(t) for t in query.targets}
    stars: dict[str, float] = {}
    for nid in net.node_ids:
        node = net[nid]
        if STAR not in node.states or node.parents or nid in ev:
            continue
        if nid in marg:
            stars[nid] = marg[nid][STAR]
        else:
            stars[nid] = exact_query(net, [nid], ev, lk).marginal(nid)[STAR]
    jt = exact_query(net, list(query.targets), ev, lk) if joint else None
    return Posterior(marg, stars, jt, len(net))
