"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting the environment
variable ``VLDHT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("VLDHT_PURE_PYTHON"):
    BACKEND = "cython"
    _impl = _compiled
else:
    BACKEND = "python"
    _impl = _kernels_py


def available_backends():
    out = {"python": _kernels_py.typical_rows}
    if _compiled is not None:
        out["cython"] = _compiled.typical_rows
    return out


def typical_rows(book, seq, nb, lo, hi, max_hits=0):
    """Rows r of ``book`` with (book[r], seq) jointly typical per the count window [lo, hi]."""
    return _impl.typical_rows(
        np.ascontiguousarray(book, dtype=np.int64),
        np.ascontiguousarray(seq, dtype=np.int64),
        int(nb),
        np.ascontiguousarray(lo, dtype=np.int64),
        np.ascontiguousarray(hi, dtype=np.int64),
        int(max_hits),
    )
