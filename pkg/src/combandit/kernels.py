"""Index kernels: the compiled extension when importable, else the pure-Python twin.

Set ``COMBANDIT_PURE=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("COMBANDIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

c_indexes = _impl.c_indexes
b_indexes = _impl.b_indexes
b_argmax_pruned = _impl.b_argmax_pruned

__all__ = ["BACKEND", "c_indexes", "b_indexes", "b_argmax_pruned"]
