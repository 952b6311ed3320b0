"""Numba on/off switch for the hot kernels.

Set ``LMMPF_NUMBA=0`` (or ``false``/``off``) before import to force the
pure-numpy fallback path even when numba is installed.
"""

import os

_FLAG = os.environ.get("LMMPF_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _FLAG not in ("0", "false", "no", "off")

if NUMBA_REQUESTED:
    try:
        from numba import njit

        NUMBA_ACTIVE = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ACTIVE = False
else:
    NUMBA_ACTIVE = False

if not NUMBA_ACTIVE:

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def accel_mode() -> str:
    """Which kernel path the package is using: 'numba' or 'numpy'."""
    return "numba" if NUMBA_ACTIVE else "numpy"
