"""JIT switch.

Numba kernels are used unless ``PHOTONODE_DISABLE_JIT`` is set to a truthy
value or numba cannot be imported; the pure-numpy twins are then used instead.
"""

import os

JIT_ENABLED = os.environ.get("PHOTONODE_DISABLE_JIT", "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    JIT_ENABLED = False

if numba is not None:
    njit = numba.njit
else:  # pragma: no cover

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper
