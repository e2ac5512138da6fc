"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension ``_ckernels`` is used when it was built and imports
cleanly. Setting ``COLT_PURE_PYTHON=1`` forces the fallback. ``BACKEND``
names whichever was selected.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("COLT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

minhash = _impl.minhash
levenshtein = _impl.levenshtein
jaccard_sorted = _impl.jaccard_sorted
jaccard_many = _impl.jaccard_many


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = ["BACKEND", "backends", "minhash", "levenshtein", "jaccard_sorted", "jaccard_many"]
