"""Factor kernels: compiled extension when built, numpy fallback otherwise.

Set ``MEBN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
product_sum = _fallback.product_sum

if os.environ.get("MEBN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import product_sum  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "product_sum"]
