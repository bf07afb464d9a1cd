"""Kernel backend selection: numba-jitted loops or pure-numpy fallbacks.

The environment variable PROCOAL_BACKEND ("numba" or "numpy") picks the
implementation at import time; `use_backend` flips it at runtime for tests
and benchmarks. A missing numba installation silently downgrades to numpy.
"""

import os

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    def prange(*args):
        return range(*args)

BACKENDS = ("numba", "numpy")

_env = os.environ.get("PROCOAL_BACKEND", "").strip().lower()
if _env and _env not in BACKENDS:
    raise ValueError(f"PROCOAL_BACKEND must be one of {BACKENDS}, got {_env!r}")
_current = _env or ("numba" if HAS_NUMBA else "numpy")
if _current == "numba" and not HAS_NUMBA:
    _current = "numpy"


def current_backend():
    return _current


def use_backend(name):
    """Switch kernel implementations; returns the previously active backend."""
    global _current
    if name not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    previous = _current
    _current = name
    return previous
