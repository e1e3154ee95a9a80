"""Backend selection for the hot batch-loss kernel.

The compiled extension (``_core``, Cython) is preferred; the pure-numpy
reference (``_ref``) is used when the extension is missing or when
``RANKLOSS_FORCE_PYTHON=1`` is set. Both expose the same
``rank_loss_and_grad`` contract and agree to tight tolerance (see
tests/test_kernels.py and benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

from . import _ref

if os.environ.get("RANKLOSS_FORCE_PYTHON") == "1":
    _impl = _ref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND_NAME: str = _impl.BACKEND_NAME
rank_loss_and_grad = _impl.rank_loss_and_grad

python_backend = _ref

__all__ = ["BACKEND_NAME", "rank_loss_and_grad", "python_backend"]
