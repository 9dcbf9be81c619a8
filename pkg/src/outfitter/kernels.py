"""Backend selection for the hot kernels.

The numba path is the default; setting ``OUTFITTER_NO_NUMBA=1`` (or any
truthy value) in the environment before import forces the pure numpy/python
fallback. Both backends stay importable side by side when numba is present
so the benchmark CLI can compare them directly.
"""
from __future__ import annotations

import os

from . import _kernels_np

ENV_FLAG = "OUTFITTER_NO_NUMBA"

_flag = os.environ.get(ENV_FLAG, "").strip().lower()
NUMBA_DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

if NUMBA_DISABLED_BY_ENV:
    _kernels_nb = None
    NUMBA_AVAILABLE = False
else:
    try:
        from . import _kernels_nb

        NUMBA_AVAILABLE = True
    except ImportError:
        _kernels_nb = None
        NUMBA_AVAILABLE = False

DEFAULT_BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


def backend(name: str | None = None):
    """Return the kernel module for ``name`` (or the default backend)."""
    if name is None:
        name = DEFAULT_BACKEND
    if name == "numpy":
        return _kernels_np
    if name == "numba":
        if _kernels_nb is None:
            raise RuntimeError(
                "numba backend unavailable "
                f"({ENV_FLAG} set or numba not importable)"
            )
        return _kernels_nb
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["numpy"]
    if _kernels_nb is not None:
        names.insert(0, "numba")
    return names
