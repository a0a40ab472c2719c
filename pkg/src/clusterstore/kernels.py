"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. ``CLUSTERSTORE_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

_MODULES = {
    "compiled": "clusterstore._kernels",
    "python": "clusterstore._kernels_py",
}


def available() -> list[str]:
    names = []
    for name, path in _MODULES.items():
        try:
            importlib.import_module(path)
        except ImportError:
            continue
        names.append(name)
    return names


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``None`` means the default)."""
    if name is None:
        return _DEFAULT
    if name not in _MODULES:
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(_MODULES[name])


def _select() -> tuple[str, ModuleType]:
    forced = os.environ.get("CLUSTERSTORE_BACKEND", "").strip().lower()
    if forced:
        return forced, get_backend(forced)
    try:
        return "compiled", importlib.import_module(_MODULES["compiled"])
    except ImportError:
        return "python", importlib.import_module(_MODULES["python"])


BACKEND, _DEFAULT = _select()
PageBuffer = _DEFAULT.PageBuffer
ChainSearcher = _DEFAULT.ChainSearcher
