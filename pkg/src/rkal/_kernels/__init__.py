"""Hot sparse kernels, compiled when available.

The Cython extension is used unless it failed to build or the environment
variable ``RKAL_PURE_PYTHON=1`` is set, in which case the pure-Python twin
with the same signatures is imported instead.
"""

import importlib
import os

_IMPLS = {"cython": "rkal._kernels._ilu0", "python": "rkal._kernels._ilu0_py"}


def load_backend(name):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    return importlib.import_module(_IMPLS[name])


def _select():
    if os.environ.get("RKAL_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _mod = _select()
ilu0_factor = _mod.ilu0_factor
ilu0_solve = _mod.ilu0_solve


def available_backends():
    out = ["python"]
    try:
        load_backend("cython")
        out.insert(0, "cython")
    except ImportError:
        pass
    return out
