"""Gated-attention block kernels with compile-time/back-off selection.

The compiled Cython core is used when it was built; otherwise the numpy
fallback takes over. Set PLIGRAPH_PURE=1 to force the fallback (useful for
benchmarks and differential testing).
"""

import os

if os.environ.get("PLIGRAPH_PURE"):
    from . import _pure as _impl
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl
        BACKEND = "pure"

block_forward = _impl.block_forward
block_backward = _impl.block_backward

__all__ = ["BACKEND", "block_forward", "block_backward"]
