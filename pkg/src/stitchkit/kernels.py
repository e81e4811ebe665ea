"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``STITCHKIT_PURE_PYTHON`` is set, the numpy fallback
is used. Both backends return identical results.
"""

import os

from . import _kernels_py

BACKEND = "python"
_compiled = None

if not os.environ.get("STITCHKIT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

zhang_suen = _impl.zhang_suen
farthest_pair = _impl.farthest_pair


def backends():
    """Mapping of available backend name -> kernel module."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
