"""Exact inference: brute-force enumeration oracle and variable elimination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .factor import Factor, product_marginalize
from .network import InconsistentEvidenceError, Network, NetworkError, UnknownNodeError

DEFAULT_JOINT_CAP = 10**7

Evidence = Mapping[str, str]
Likelihoods = Mapping[str, Sequence[float]]


@dataclass(frozen=True)
class JointQueryResult:
    target_ids: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    table: np.ndarray

    def marginal(self, node_id: str) -> dict[str, float]:
        ax = self.target_ids.index(node_id)
        other = tuple(i for i in range(len(self.target_ids)) if i != ax)
        m = self.table.sum(axis=other) if other else self.table
        return dict(zip(self.states[ax], (float(x) for x in m)))

    def prob(self, assignment: Mapping[str, str]) -> float:
        idx = tuple(self.states[i].index(assignment[t]) for i, t in enumerate(self.target_ids))
        return float(self.table[idx])


def node_factor(net: Network, node_id: str) -> Factor:
    node = net[node_id]
    return Factor(node.parents + (node_id,), np.ascontiguousarray(node.cpt))


def brute_force_joint(net: Network, cap: int = DEFAULT_JOINT_CAP) -> JointQueryResult:
    """Full joint over all nodes by explicit products of CPT entries.

    Intended as a test oracle; refuses networks whose joint exceeds ``cap``.
    """
    ids = net.node_ids
    size = 1
    for n in ids:
        size *= net[n].card
        if size > cap:
            raise NetworkError(f"joint table size exceeds cap {cap}")
    pos = {n: i for i, n in enumerate(ids)}
    joint = np.ones(tuple(net[n].card for n in ids))
    for n in ids:
        node = net[n]
        axes = [pos[p] for p in node.parents] + [pos[n]]
        shape = [1] * len(ids)
        for a, c in zip(axes, node.cpt.shape):
            shape[a] = c
        # cpt axes are in parents+self order; move them into network order
        order = np.argsort(axes)
        joint = joint * node.cpt.transpose(order).reshape(shape)
    return JointQueryResult(ids, tuple(net[n].states for n in ids), joint)


def _check_query(net: Network, targets: Sequence[str], evidence: Evidence, likelihoods: Likelihoods) -> None:
    if not targets:
        raise NetworkError("no targets")
    if len(set(targets)) != len(targets):
        raise NetworkError("duplicate target")
    for t in targets:
        net[t]
    for e, s in evidence.items():
        if e not in net:
            raise UnknownNodeError(e)
        net[e].state_index(s)
    for e, lam in likelihoods.items():
        if e not in net:
            raise UnknownNodeError(e)
        if len(lam) != net[e].card:
            raise NetworkError(f"likelihood for {e} has length {len(lam)}, expected {net[e].card}")
        if any(x < 0 for x in lam):
            raise NetworkError(f"negative likelihood for {e}")
    clash = set(targets) & set(evidence)
    if clash:
        raise NetworkError(f"target is evidence: {sorted(clash)}")


def oracle_posterior(
    net: Network,
    targets: Sequence[str],
    evidence: Evidence | None = None,
    likelihoods: Likelihoods | None = None,
    cap: int = DEFAULT_JOINT_CAP,
) -> JointQueryResult:
    """Posterior over ``targets`` by normalizing the brute-force joint."""
    evidence = dict(evidence or {})
    likelihoods = dict(likelihoods or {})
    _check_query(net, targets, evidence, likelihoods)
    full = brute_force_joint(net, cap)
    ids = list(full.target_ids)
    table = full.table
    for n, lam in likelihoods.items():
        shape = [1] * len(ids)
        shape[ids.index(n)] = len(lam)
        table = table * np.asarray(lam, dtype=float).reshape(shape)
    index = []
    for n in ids:
        index.append(net[n].state_index(evidence[n]) if n in evidence else slice(None))
    table = table[tuple(index)]
    remaining = [n for n in ids if n not in evidence]
    drop = tuple(i for i, n in enumerate(remaining) if n not in targets)
    table = table.sum(axis=drop) if drop else table
    kept = [n for n in remaining if n in targets]
    table = table.transpose([kept.index(t) for t in targets])
    z = table.sum()
    if not z > 0:
        raise InconsistentEvidenceError("inconsistent evidence: probability zero")
    return JointQueryResult(tuple(targets), tuple(net[t].states for t in targets), table / z)


def min_fill_order(scopes: Sequence[Sequence[str]], eliminate: Sequence[str]) -> list[str]:
    """Greedy min-fill elimination order; ties broken by lexicographic node id."""
    adj: dict[str, set[str]] = {v: set() for s in scopes for v in s}
    for s in scopes:
        for a in s:
            adj[a].update(b for b in s if b != a)
    todo = set(eliminate)
    for v in todo:
        adj.setdefault(v, set())
    order = []
    while todo:
        best, best_cost = None, None
        for v in sorted(todo):
            nb = list(adj[v])
            cost = 0
            for i in range(len(nb)):
                ai = adj[nb[i]]
                for j in range(i + 1, len(nb)):
                    if nb[j] not in ai:
                        cost += 1
            if best_cost is None or cost < best_cost:
                best, best_cost = v, cost
                if cost == 0:
                    break
        order.append(best)
        nb = adj.pop(best)
        for a in nb:
            adj[a].discard(best)
            adj[a].update(b for b in nb if b != a)
        todo.remove(best)
    return order


def exact_query(
    net: Network,
    targets: Sequence[str],
    evidence: Evidence | None = None,
    likelihoods: Likelihoods | None = None,
) -> JointQueryResult:
    """Posterior joint over ``targets`` given hard ``evidence`` and optional
    per-node ``likelihoods`` (virtual evidence vectors over the node's states).

    Variable elimination with a min-fill order (lexicographic tie-break), so
    repeated calls are bitwise identical.
    """
    evidence = dict(evidence or {})
    likelihoods = dict(likelihoods or {})
    targets = list(targets)
    _check_query(net, targets, evidence, likelihoods)

    factors: list[Factor] = []
    for nid in net.node_ids:
        f = node_factor(net, nid)
        for v in f.variables:
            if v in evidence:
                f = f.reduce(v, net[v].state_index(evidence[v]))
        factors.append(f)
    for nid in sorted(likelihoods):
        if nid in evidence:
            continue
        factors.append(Factor((nid,), np.asarray(likelihoods[nid], dtype=np.float64)))

    hidden = [n for n in net.node_ids if n not in evidence and n not in targets]
    for var in min_fill_order([f.variables for f in factors], hidden):
        touching = [f for f in factors if var in f.variables]
        rest = [f for f in factors if var not in f.variables]
        rest.append(product_marginalize(touching, var))
        factors = rest

    result = product_marginalize(factors)
    missing = [t for t in targets if t not in result.variables]
    if missing:  # targets not touched by any factor cannot happen for valid nets
        raise NetworkError(f"targets lost during elimination: {missing}")
    result = result.transpose(targets)
    z = float(result.values.sum())
    if not z > 0 or not np.isfinite(z):
        raise InconsistentEvidenceError(
            "inconsistent evidence: probability zero for " + ", ".join(f"{k}={v}" for k, v in sorted(evidence.items()))
        )
    return JointQueryResult(tuple(targets), tuple(net[t].states for t in targets), result.values / z)


def marginals(
    net: Network,
    targets: Sequence[str],
    evidence: Evidence | None = None,
    likelihoods: Likelihoods | None = None,
) -> dict[str, dict[str, float]]:
    """Per-target posterior marginals, one elimination run per target."""
    return {t: exact_query(net, [t], evidence, likelihoods).marginal(t) for t in targets}
