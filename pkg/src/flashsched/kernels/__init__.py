"""Bucket-scan kernels with a compiled fast path.

The Cython extension ``_overlap`` is optional; the pure-Python module is
the reference implementation and the import-time fallback. Set
``FLASHSCHED_PURE=1`` to force the fallback (the benchmark uses this).
"""

import os

from . import _pure

if os.environ.get("FLASHSCHED_PURE"):
    _impl = _pure
else:
    try:
        from . import _overlap as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

IMPL = _impl.IMPL
fifo_pick = _impl.fifo_pick
score_bucket = _impl.score_bucket
priority_pick = _impl.priority_pick

pure = _pure
