"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension (``_speedups``, built from the Cython source via
``python setup.py build_ext --inplace``) is preferred when importable.
Set ``TRAJCHECK_PURE_KERNELS=1`` to force the pure implementations, e.g.
for benchmarking or debugging.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("TRAJCHECK_PURE_KERNELS"):
    _impl = pure
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND = "pure" if _impl is pure else "compiled"

levenshtein = _impl.levenshtein
common_prefix_len = _impl.common_prefix_len
ged_path = _impl.ged_path

__all__ = ["BACKEND", "levenshtein", "common_prefix_len", "ged_path", "pure"]
