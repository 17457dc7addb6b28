"""Backend selection for the plant kernels.

The compiled extension is used when it is importable; otherwise, or when
``CBFLEARN_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
pure-Python module is used. Both expose ``segway_deriv`` and ``rk4_hold``.
"""

import importlib
import os

from . import _kernels_py

BACKENDS = ("cython", "python")


def load_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("cbflearn._kernels")
    raise ValueError(f"unknown kernel backend {name!r}; expected one of {BACKENDS}")


def available_backends():
    names = []
    for name in BACKENDS:
        try:
            load_backend(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    if os.environ.get("CBFLEARN_PURE_PYTHON", "0") not in ("", "0"):
        return "python", _kernels_py
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", _kernels_py


BACKEND, _impl = _select()
segway_deriv = _impl.segway_deriv
rk4_hold = _impl.rk4_hold
