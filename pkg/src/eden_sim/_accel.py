"""Backend selection for the numeric kernels.

Kernels are compiled with numba when it is importable. Setting the
environment variable ``EDEN_SIM_DISABLE_JIT=1`` (read at import time) or
calling :func:`set_backend` selects the pure-numpy implementations instead.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

_DISABLED = os.environ.get("EDEN_SIM_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")

_backend = "numba" if (HAVE_NUMBA and not _DISABLED) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def get_backend():
    return _backend


def set_backend(name):
    """Switch kernels between ``"numba"`` and ``"numpy"``; returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev
