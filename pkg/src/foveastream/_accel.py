"""Backend selection for the hot kernels.

Set ``FOVEASTREAM_DISABLE_NUMBA=1`` to force the pure-numpy path. The flag
is read once, at import time.
"""

import os

_FLAG = "FOVEASTREAM_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _env_disabled()


def njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it unchanged."""
    if not NUMBA_AVAILABLE:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
