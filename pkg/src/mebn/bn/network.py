"""Discrete Bayesian network container with load-time validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

STAR = "*"
NORMALIZATION_TOL = 1e-9


class NetworkError(ValueError):
    """Raised when a network or query is malformed."""


class CycleError(NetworkError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(self.cycle))


class CptError(NetworkError):
    def __init__(self, node_id: str, message: str, row: int | None = None):
        self.node_id = node_id
        self.row = row
        where = f"node {node_id}" + (f" row {row}" if row is not None else "")
        super().__init__(f"{where}: {message}")


class UnknownNodeError(NetworkError, KeyError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        NetworkError.__init__(self, f"unknown node {node_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class InconsistentEvidenceError(NetworkError):
    """Evidence has probability zero under the network."""


def normalize_rows(values: np.ndarray, node_id: str, tol: float = NORMALIZATION_TOL) -> np.ndarray:
    """Check every distribution along the last axis, renormalizing within `tol`."""
    flat = values.reshape(-1, values.shape[-1])
    if not np.all(np.isfinite(flat)):
        bad = int(np.argwhere(~np.isfinite(flat))[0, 0])
        raise CptError(node_id, "non-finite entry", bad)
    if np.any(flat < 0):
        bad = int(np.argwhere(flat < 0)[0, 0])
        raise CptError(node_id, "negative entry", bad)
    sums = flat.sum(axis=1)
    off = np.abs(sums - 1.0) > tol
    if np.any(off):
        bad = int(np.argmax(off))
        raise CptError(node_id, f"row sums to {sums[bad]!r}, not 1", bad)
    # rescale only visibly off rows so that rebuilding a network is a no-op
    fix = np.abs(sums - 1.0) > 1e-13
    if np.any(fix):
        flat = flat.copy()
        flat[fix] /= sums[fix, None]
    return flat.reshape(values.shape)


@dataclass(frozen=True, eq=False)
class DiscreteNode:
    """A node with an ordered state space and a CPT.

    ``cpt`` has shape ``(|pa_1|, ..., |pa_n|, |states|)``; the parent axes
    follow ``parents`` and the last axis indexes ``states``.  A flat list of
    rows (first parent varying slowest) is accepted too when the network is
    built.
    """

    node_id: str
    states: tuple[str, ...]
    parents: tuple[str, ...] = ()
    cpt: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "parents", tuple(self.parents))

    @property
    def card(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise NetworkError(f"node {self.node_id}: unknown state {state!r}") from None

    def __repr__(self) -> str:
        return f"DiscreteNode({self.node_id!r}, states={self.states}, parents={self.parents})"


class Network:
    """Validated, immutable discrete Bayesian network.

    Use :func:`build_network` rather than calling the constructor directly.
    """

    def __init__(self, nodes: Mapping[str, DiscreteNode], order: Sequence[str]):
        self._nodes = dict(nodes)
        self._order = tuple(order)
        children: dict[str, list[str]] = {n: [] for n in self._order}
        for nid in self._order:
            for p in self._nodes[nid].parents:
                children[p].append(nid)
        self._children = {k: tuple(v) for k, v in children.items()}

    @property
    def node_ids(self) -> tuple[str, ...]:
        """Node ids in a topological order (ties broken lexicographically)."""
        return self._order

    @property
    def nodes(self) -> tuple[DiscreteNode, ...]:
        return tuple(self._nodes[n] for n in self._order)

    def __getitem__(self, node_id: str) -> DiscreteNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self):
        return iter(self.nodes)

    def parents(self, node_id: str) -> tuple[str, ...]:
        return self[node_id].parents

    def children(self, node_id: str) -> tuple[str, ...]:
        self[node_id]
        return self._children[node_id]

    def ancestors(self, node_ids: Iterable[str]) -> set[str]:
        """Proper ancestors of the given nodes (excluding the nodes themselves
        unless one is an ancestor of another)."""
        seen: set[str] = set()
        stack = [p for n in node_ids for p in self[n].parents]
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(self._nodes[n].parents)
        return seen

    def descendants(self, node_ids: Iterable[str]) -> set[str]:
        seen: set[str] = set()
        stack = [c for n in node_ids for c in self.children(n)]
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(self._children[n])
        return seen

    def edges(self) -> list[tuple[str, str]]:
        return [(p, n) for n in self._order for p in self._nodes[n].parents]

    def subnetwork(self, keep: Iterable[str], replace: Mapping[str, DiscreteNode] | None = None) -> "Network":
        """Network restricted to `keep`; `replace` supplies substitute nodes."""
        keep = set(keep)
        nodes = [(replace or {}).get(n, self._nodes[n]) for n in self._order if n in keep]
        return build_network(nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network) or self._order != other._order:
            return False
        for nid in self._order:
            a, b = self._nodes[nid], other._nodes[nid]
            if a.states != b.states or a.parents != b.parents or not np.array_equal(a.cpt, b.cpt):
                return False
        return True

    def __repr__(self) -> str:
        return f"Network({len(self)} nodes, {len(self.edges())} edges)"


def _coerce_cpt(node: DiscreteNode, parent_cards: Sequence[int]) -> np.ndarray:
    expected_rows = int(np.prod(parent_cards)) if parent_cards else 1
    arr = np.asarray(node.cpt, dtype=np.float64)
    if arr.ndim == 1 and not parent_cards and arr.shape[0] == node.card:
        arr = arr[None, :]
    if arr.ndim == 2:
        if arr.shape[1] != node.card:
            raise CptError(node.node_id, f"row width {arr.shape[1]}, expected {node.card}")
        if arr.shape[0] != expected_rows:
            raise CptError(node.node_id, f"row count {arr.shape[0]}, expected {expected_rows}")
    elif arr.shape != tuple(parent_cards) + (node.card,):
        if arr.size % max(node.card, 1) == 0 and arr.size // node.card != expected_rows:
            raise CptError(node.node_id, f"row count {arr.size // node.card}, expected {expected_rows}")
        raise CptError(node.node_id, f"CPT shape {arr.shape}, expected {tuple(parent_cards) + (node.card,)}")
    arr = arr.reshape(tuple(parent_cards) + (node.card,))
    arr = normalize_rows(arr, node.node_id)
    arr.setflags(write=False)
    return arr


def _topological_order(nodes: Mapping[str, DiscreteNode]) -> list[str]:
    indeg = {n: len(set(v.parents)) for n, v in nodes.items()}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for n, v in nodes.items():
        for p in set(v.parents):
            children[p].append(n)
    import heapq

    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != len(nodes):
        raise CycleError(_find_cycle(nodes, set(nodes) - set(order)))
    return order


def _find_cycle(nodes: Mapping[str, DiscreteNode], remaining: set[str]) -> list[str]:
    # every remaining node has a remaining parent; walk parents until a repeat
    start = min(remaining)
    path, pos = [start], {start: 0}
    cur = start
    while True:
        cur = min(p for p in nodes[cur].parents if p in remaining)
        if cur in pos:
            cyc = path[pos[cur]:]
            cyc.reverse()
            return cyc + [cyc[0]]
        pos[cur] = len(path)
        path.append(cur)


def build_network(nodes: Iterable[DiscreteNode]) -> Network:
    """Validate nodes and assemble an immutable :class:`Network`.

    Raises :class:`NetworkError` subclasses for duplicate ids, dangling
    parents, cycles and malformed CPTs.
    """
    by_id: dict[str, DiscreteNode] = {}
    for node in nodes:
        if node.node_id in by_id:
            raise NetworkError(f"duplicate node id {node.node_id!r}")
        if not node.states:
            raise NetworkError(f"node {node.node_id}: empty state space")
        if len(set(node.states)) != len(node.states):
            raise NetworkError(f"node {node.node_id}: duplicate state labels")
        if len(set(node.parents)) != len(node.parents):
            raise NetworkError(f"node {node.node_id}: duplicate parent")
        by_id[node.node_id] = node
    for node in by_id.values():
        for p in node.parents:
            if p not in by_id:
                raise NetworkError(f"node {node.node_id}: dangling parent reference {p!r}")
    order = _topological_order(by_id)
    checked = {}
    for nid in order:
        node = by_id[nid]
        cards = [by_id[p].card for p in node.parents]
        checked[nid] = DiscreteNode(nid, node.states, node.parents, _coerce_cpt(node, cards))
    return Network(checked, order)
