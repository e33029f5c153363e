"""Table factors over named discrete variables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _ext


@dataclass(frozen=True)
class Factor:
    variables: tuple[str, ...]
    values: np.ndarray  # shape == cards of `variables`, C-contiguous float64

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    def reduce(self, var: str, index: int) -> "Factor":
        """Condition on ``var`` taking state ``index``; drops the axis."""
        ax = self.variables.index(var)
        vals = np.ascontiguousarray(np.take(self.values, index, axis=ax))
        return Factor(self.variables[:ax] + self.variables[ax + 1:], vals)

    def transpose(self, order: Sequence[str]) -> "Factor":
        perm = [self.variables.index(v) for v in order]
        return Factor(tuple(order), np.ascontiguousarray(self.values.transpose(perm)))


def _strides(factor: Factor, union: Sequence[str]) -> list[int]:
    pos = {v: i for i, v in enumerate(factor.variables)}
    shape = factor.values.shape
    c_strides = [1] * len(shape)
    for i in range(len(shape) - 2, -1, -1):
        c_strides[i] = c_strides[i + 1] * shape[i + 1]
    out = []
    for v in union:
        i = pos.get(v)
        out.append(0 if i is None or shape[i] == 1 else c_strides[i])
    return out


def product_marginalize(factors: Sequence[Factor], eliminate: str | None = None) -> Factor:
    """Multiply ``factors`` and sum out ``eliminate`` (if given) in one pass.

    Variable order of the result is first-appearance order across the inputs.
    """
    union: list[str] = []
    cards: dict[str, int] = {}
    for f in factors:
        for v, c in zip(f.variables, f.values.shape):
            if v not in cards:
                union.append(v)
                cards[v] = c
            elif cards[v] != c:
                raise ValueError(f"cardinality mismatch for {v}: {cards[v]} vs {c}")
    strides = np.array([_strides(f, union) for f in factors], dtype=np.int64).reshape(len(factors), len(union))
    card = np.array([cards[v] for v in union], dtype=np.int64)
    elim = union.index(eliminate) if eliminate is not None else -1
    arrays = [np.ascontiguousarray(f.values, dtype=np.float64).reshape(-1) for f in factors]
    flat = _ext.product_sum(arrays, strides, card, elim)
    keep = [v for v in union if v != eliminate]
    return Factor(tuple(keep), flat.reshape([cards[v] for v in keep]))
