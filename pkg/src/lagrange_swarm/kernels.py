"""Backend selection for the two-link network integrator.

The compiled extension is used when it imports; otherwise the numpy twin.
``LAGRANGE_SWARM_BACKEND=python`` forces the fallback, ``=compiled`` makes a
missing extension an error.
"""
from __future__ import annotations

import logging
import os

from . import _pykernel

log = logging.getLogger(__name__)

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

COMPILED_AVAILABLE = _ckernel is not None


def _select(choice: str):
    if choice == "python":
        return _pykernel
    if choice == "compiled":
        if _ckernel is None:
            raise ImportError("LAGRANGE_SWARM_BACKEND=compiled but the extension is not built")
        return _ckernel
    if choice != "auto":
        raise ValueError(f"unknown backend {choice!r}")
    return _ckernel if _ckernel is not None else _pykernel


_backend = _select(os.environ.get("LAGRANGE_SWARM_BACKEND", "auto"))
BACKEND = "compiled" if _backend is _ckernel else "python"
if BACKEND == "python":
    log.debug("using the pure-Python integrator kernel")

advance = _backend.advance
rhs = _backend.rhs


def get(name: str):
    """Return the kernel module ``'compiled'`` or ``'python'`` regardless of the default."""
    return _select(name)
