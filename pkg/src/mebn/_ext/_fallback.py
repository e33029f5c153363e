"""Pure numpy implementation of the factor kernel (same contract as ``_kernels``)."""

from __future__ import annotations

import numpy as np


def product_sum(arrays, strides, card, elim):
    # Axes of size 1 must carry stride 0; the remaining strides of a C-ordered
    # factor are then strictly decreasing, which recovers the factor's axis order.
    card = [int(c) for c in card]
    D = len(card)
    acc = np.ones((1,) * D)
    for flat, st in zip(arrays, strides):
        axes = sorted((d for d in range(D) if st[d] != 0), key=lambda d: -st[d])
        arr = np.asarray(flat).reshape([card[d] for d in axes])
        arr = arr.transpose(sorted(range(len(axes)), key=lambda i: axes[i]))
        acc = acc * arr.reshape([card[d] if st[d] != 0 else 1 for d in range(D)])
    acc = np.broadcast_to(acc, card)
    if elim >= 0:
        acc = acc.sum(axis=elim)
    return np.ascontiguousarray(acc, dtype=np.float64).reshape(-1)
