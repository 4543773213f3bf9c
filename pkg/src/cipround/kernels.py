"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``CIPROUND_BACKEND=python``
to force the pure-Python fallback. Both backends expose ``relax`` and
``row_activity`` with identical semantics and identical random streams.
"""
import os

from cipround import _fallback

BACKENDS = {"python": _fallback}

try:
    from cipround import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["cython"] = _kernels

if os.environ.get("CIPROUND_BACKEND", "").lower() == "python" or _kernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None


def relax(*args, **kwargs):
    return _impl.relax(*args, **kwargs)


def row_activity(*args, **kwargs):
    return _impl.row_activity(*args, **kwargs)
