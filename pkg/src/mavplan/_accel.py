"""Numba selection.

Kernels are written in the numba-compatible subset of numpy. Setting
``MAVPLAN_DISABLE_NUMBA=1`` (or running without numba installed) makes
``njit`` the identity decorator, so the same source runs as plain numpy.
"""

import os
import warnings

_DISABLED = os.environ.get("MAVPLAN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _nb
except ImportError:
    _nb = None
    if not _DISABLED:
        warnings.warn("numba not found; falling back to pure numpy kernels", RuntimeWarning)

NUMBA_ENABLED = _nb is not None


def njit(*args, **kwargs):
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def identity(fn):
        return fn

    return identity


def py_func(fn):
    """Return the uncompiled python function behind a kernel."""
    return getattr(fn, "py_func", fn)
