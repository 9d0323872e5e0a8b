"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy/pure-Python ``_fallback`` module. Setting ``BINARYPPO_BACKEND=python``
forces the fallback (checked once, at import).
"""
import importlib
import os

BACKENDS = ("cython", "python")
_MODULES = {"cython": "binaryppo._kernels", "python": "binaryppo._fallback"}


def load(name):
    """Import and return the kernel module for backend ``name``."""
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    return importlib.import_module(_MODULES[name])


def available():
    names = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    requested = os.environ.get("BINARYPPO_BACKEND", "").strip().lower()
    if requested:
        return requested, load(requested)
    try:
        return "cython", load("cython")
    except ImportError:
        return "python", load("python")


NAME, kernels = _select()
