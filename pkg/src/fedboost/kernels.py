"""Kernel backend selection.

Prefers the compiled extension; falls back to the numpy implementation when
the extension is absent or ``FEDBOOST_PURE_PYTHON=1`` is set. Both backends
produce bit-identical results, so the choice only affects speed.
"""

import os

_force_python = os.environ.get("FEDBOOST_PURE_PYTHON", "") == "1"

if _force_python:
    from fedboost._kernels_py import best_splits, hist_accumulate, predict_rows

    BACKEND = "python"
else:
    try:
        from fedboost._kernels import best_splits, hist_accumulate, predict_rows

        BACKEND = "cython"
    except ImportError:
        from fedboost._kernels_py import best_splits, hist_accumulate, predict_rows

        BACKEND = "python"

__all__ = ["best_splits", "hist_accumulate", "predict_rows", "BACKEND"]
