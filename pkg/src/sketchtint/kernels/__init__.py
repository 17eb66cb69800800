"""Raster kernels with a compiled fast path and a numpy fallback.

The compiled extension is optional: if it failed to build, or the
``SKETCHTINT_PURE`` environment variable is set to a non-empty value,
the pure numpy implementations are used instead. Both lanes produce
bit-identical outputs.
"""

import os

from . import fallback

if os.environ.get("SKETCHTINT_PURE"):
    _impl = fallback
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = fallback

thin = _impl.thin
flood_exterior = _impl.flood_exterior
nearest_assign = _impl.nearest_assign
rle_encode = _impl.rle_encode
rle_decode = _impl.rle_decode


def backend_name() -> str:
    """Which lane is active: ``"native"`` or ``"fallback"``."""
    return "native" if _impl is not fallback else "fallback"


__all__ = [
    "thin",
    "flood_exterior",
    "nearest_assign",
    "rle_encode",
    "rle_decode",
    "backend_name",
]
