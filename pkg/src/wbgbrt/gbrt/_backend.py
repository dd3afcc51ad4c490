"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback.  ``WBGBRT_BACKEND=python`` forces the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def default_backend() -> str:
    forced = os.environ.get("WBGBRT_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise ImportError(f"WBGBRT_BACKEND={forced!r} is not available; have {sorted(BACKENDS)}")
        return forced
    return "compiled" if _compiled is not None else "python"


BACKEND = default_backend()


def get(name: str | None = None):
    """Kernel module for ``name`` (default: the import-time selection)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None
