"""Backend selection for the hot kernels.

Numba is used when importable unless ``SLNET_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy kernels run instead.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def numba_disabled() -> bool:
    return os.environ.get("SLNET_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


def default_backend() -> str:
    if HAVE_NUMBA and not numba_disabled():
        return "numba"
    return "numpy"


def resolve_backend(name: str | None) -> str:
    if name is None:
        return default_backend()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return name


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or the identity without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
