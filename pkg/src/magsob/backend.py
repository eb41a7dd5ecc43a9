"""Engine selection: compiled extension when available, NumPy otherwise.

The compiled core only understands catalog descriptors, so generic
callable fields always route to the NumPy engine.  ``MAGSOB_BACKEND``
overrides the automatic choice (``python`` forces the fallback,
``cython`` insists on the extension).
"""

from __future__ import annotations

import os

from .errors import UsageError

try:
    from . import _core

    HAVE_COMPILED = True
except ImportError:  # pure-python install
    _core = None
    HAVE_COMPILED = False

from . import _core_py

__all__ = ["HAVE_COMPILED", "backend_name", "select", "compiled", "fallback"]


def backend_name() -> str:
    """The backend the next energy evaluation will prefer."""
    forced = os.environ.get("MAGSOB_BACKEND", "").strip().lower()
    if forced == "python":
        return "python"
    if forced in ("cython", "compiled"):
        if not HAVE_COMPILED:
            raise UsageError("MAGSOB_BACKEND=cython but the extension is not built")
        return "cython"
    if forced:
        raise UsageError(f"unknown MAGSOB_BACKEND {forced!r}")
    return "cython" if HAVE_COMPILED else "python"


def select(u, A) -> str:
    """Backend for one (field, potential) pair."""
    name = backend_name()
    if name == "cython" and (u.core is None or A.core is None):
        return "python"
    return name


def compiled():
    return _core


def fallback():
    return _core_py
