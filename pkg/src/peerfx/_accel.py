"""Backend selection for the numeric kernels.

Set ``PEERFX_BACKEND=numpy`` to force the pure-numpy path. With the default
(``auto``) numba is used when it imports cleanly.
"""

import os

_requested = os.environ.get("PEERFX_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ImportError(
        f"PEERFX_BACKEND must be one of auto, numba, numpy; got {_requested!r}"
    )

HAVE_NUMBA = False
if _requested != "numpy":
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise

BACKEND = "numba" if HAVE_NUMBA else "numpy"

if not HAVE_NUMBA:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
