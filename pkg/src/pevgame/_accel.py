"""Backend selection for the hot loops.

Set ``PEVGAME_NO_JIT=1`` to force the pure-numpy kernels even when numba is
installed.
"""

import os

JIT_DISABLED = os.environ.get("PEVGAME_NO_JIT", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not JIT_DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"
