"""Backend selection for the hot kernels.

Numba is used when it can be imported and ``MASKREFINE_DISABLE_NUMBA`` is not
set to a truthy value. Both backends stay importable so they can be compared.
"""
import os

ENV_FLAG = "MASKREFINE_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None


def numba_disabled():
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def use_numba():
    return HAVE_NUMBA and not numba_disabled()


def njit(fn):
    """Compile ``fn`` lazily with numba; identity when numba is missing."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
