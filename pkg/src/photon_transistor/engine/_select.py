"""Pick the compiled kernels when available, else the pure-Python ones."""

from __future__ import annotations

import os

_FORCE_PURE = os.environ.get("PHOTON_TRANSISTOR_PURE", "").strip() not in ("", "0")

if _FORCE_PURE:
    from . import _fallback as _active
else:
    try:
        from . import _kernels as _active
    except ImportError:
        from . import _fallback as _active


def kernels():
    """The kernel module in use (``.NAME`` is ``"cython"`` or ``"python"``)."""
    return _active


def fallback():
    from . import _fallback
    return _fallback


def compiled():
    """The compiled kernel module, or None if it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
