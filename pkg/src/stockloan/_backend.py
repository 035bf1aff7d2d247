"""Numerical backend selection.

At import time the compiled core (``stockloan._core_cy``) is preferred; if it
is not built the NumPy fallback (``stockloan._core_py``) is used. Selection
can be forced with the ``STOCKLOAN_BACKEND`` environment variable
(``cython`` or ``python``) or at runtime with :func:`set_backend` — the
benchmark suite uses the latter to compare both implementations.
"""

from __future__ import annotations

import os

_NAMES = ("cython", "python")


def _load(name: str):
    if name == "cython":
        from . import _core_cy as mod
    elif name == "python":
        from . import _core_py as mod
    else:
        raise ValueError(f"unknown backend {name!r}; expected one of {_NAMES}")
    return mod


def _initial():
    requested = os.environ.get("STOCKLOAN_BACKEND", "").strip().lower()
    if requested:
        return _load(requested), requested
    try:
        return _load("cython"), "cython"
    except ImportError:
        return _load("python"), "python"


core, _name = _initial()


def set_backend(name: str) -> None:
    """Switch the active backend (mainly for benchmarks and parity tests)."""
    global core, _name
    core = _load(name)
    _name = name


def backend_name() -> str:
    """Name of the active backend: ``cython`` or ``python``."""
    return _name
