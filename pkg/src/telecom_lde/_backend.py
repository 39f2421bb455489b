"""Backend selection for the hot kernels.

Set ``TELECOM_LDE_BACKEND=numpy`` to force the pure-numpy path; the default is
``numba`` whenever numba imports cleanly.
"""

import os
import warnings

_requested = os.environ.get("TELECOM_LDE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    warnings.warn(f"unknown TELECOM_LDE_BACKEND={_requested!r}; using numba")
    _requested = "numba"

# numba probes TBB first and warns when the installed TBB is too old; it then
# falls back to OpenMP or its own work queue, which is all we need
warnings.filterwarnings("ignore", message="The TBB threading layer")

try:
    import numba as _numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAS_NUMBA = False

BACKEND = "numba" if (HAS_NUMBA and _requested == "numba") else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Kernels decorated with this are always compiled if numba exists (so the
    benchmark can compare both paths); ``BACKEND`` only decides which path the
    library calls.
    """
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


prange = _numba.prange if HAS_NUMBA else range


def set_threads(n):
    """Set the numba thread count; a no-op on the numpy path."""
    if HAS_NUMBA and n:
        _numba.set_num_threads(max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS)))
