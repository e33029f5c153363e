"""Distance gating and candidate counting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

DEFAULT_GATE_RADIUS = 500.0
DEFAULT_MAX_CANDIDATES = 8


@dataclass(frozen=True)
class GatePolicy:
    radius: float = DEFAULT_GATE_RADIUS  # meters, Euclidean
    max_candidates: int = DEFAULT_MAX_CANDIDATES

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"gate radius must be > 0, got {self.radius}")
        if self.max_candidates < 1:
            raise ValueError(f"max_candidates must be >= 1, got {self.max_candidates}")


def distance_gate(reports: Sequence[Any], policy: GatePolicy) -> list[list[Any]]:
    """Single-linkage clusters at the gate radius.

    Reports need ``report_id`` and ``position`` attributes.  Members are
    listed in report-id order and clusters ordered by their smallest id, so
    the result does not depend on input order.
    """
    if not reports:
        return []
    items = sorted(reports, key=lambda r: r.report_id)
    pts = np.array([r.position for r in items], dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("report positions must be finite")
    pairs = cKDTree(pts).query_pairs(policy.radius, output_type="ndarray")
    n = len(items)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else \
        coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, list[Any]] = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(items[idx])
    # items are id-sorted, so each group is too; order groups by first member
    return sorted(groups.values(), key=lambda g: g[0].report_id)


def count_ungated_candidates(n: int, k: int) -> int:
    """Number of ways to choose a size-``k`` group from ``n`` reports."""
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    return math.comb(n, k)
