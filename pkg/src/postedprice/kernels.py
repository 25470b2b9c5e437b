"""Backend selection for the search kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise the
pure-Python ``_fallback``. Set ``POSTEDPRICE_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("POSTEDPRICE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

knapsack_dp = _impl.knapsack_dp
bnb_multi_resource = _impl.bnb_multi_resource
bnb_multi_slot = _impl.bnb_multi_slot


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


__all__ = [
    "BACKEND",
    "knapsack_dp",
    "bnb_multi_resource",
    "bnb_multi_slot",
    "compiled_available",
]
