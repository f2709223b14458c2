"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set NSI_IBP_PURE_PYTHON=1 to force the numpy backend.
"""
import os

from . import _kernels_py

BACKEND = "python"
inner_pieces = _kernels_py.inner_pieces

if os.environ.get("NSI_IBP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        inner_pieces = _compiled.inner_pieces
        BACKEND = "cython"
