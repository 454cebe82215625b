"""Hot-loop kernel dispatch: compiled extension when available, NumPy otherwise.

The compiled module (``soilcopilot._fastkern``, Cython) and the NumPy fallback
(``soilcopilot._kernels_np``) implement identical contracts; which one backs
this module is decided once at import. Set SOILCOPILOT_PURE_PYTHON=1 to force
the fallback. ``BACKEND`` records the choice ("cython" or "numpy");
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_np

_impl = None
if not os.environ.get("SOILCOPILOT_PURE_PYTHON"):
    try:
        from . import _fastkern as _impl
    except ImportError:
        _impl = None
if _impl is None:
    _impl = _kernels_np

BACKEND: str = "numpy" if _impl is _kernels_np else "cython"


def block_sum_count(values, win_h: int, win_w: int):
    """Per-block (sum, count) of a real grid; NaN samples are skipped.

    Output blocks are ceil(h/win_h) x ceil(w/win_w); edge blocks cover only
    the pixels present.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    return _impl.block_sum_count(values, int(win_h), int(win_w))


def coherence_block_sums(s1, s2, win_h: int, win_w: int):
    """Per-block sums for the coherence estimator.

    Over the samples valid in BOTH images, per block: sum(s1*conj(s2)),
    sum(|s1|^2), sum(|s2|^2), and the valid-sample count.
    """
    s1 = np.ascontiguousarray(s1, dtype=np.complex128)
    s2 = np.ascontiguousarray(s2, dtype=np.complex128)
    if s1.shape != s2.shape:
        raise ValueError(f"shape mismatch: {s1.shape} vs {s2.shape}")
    return _impl.coherence_block_sums(s1, s2, int(win_h), int(win_w))


def label_regions(mask):
    """4-connected components of a boolean grid.

    Returns (labels, bboxes): labels is int32 with -1 background and component
    ids 0..n-1 in row-major discovery order; bboxes is an (n, 4) int64 array
    of (min_row, min_col, max_row, max_col), inclusive.
    """
    mask = np.ascontiguousarray(np.asarray(mask, dtype=bool))
    labels, n = _impl.label_scan(mask.astype(np.uint8))
    bboxes = np.zeros((n, 4), dtype=np.int64)
    if n:
        rows, cols = np.nonzero(labels >= 0)
        ids = labels[rows, cols]
        bboxes[:, 0] = np.full(n, np.iinfo(np.int64).max)
        bboxes[:, 1] = np.full(n, np.iinfo(np.int64).max)
        np.minimum.at(bboxes[:, 0], ids, rows)
        np.minimum.at(bboxes[:, 1], ids, cols)
        np.maximum.at(bboxes[:, 2], ids, rows)
        np.maximum.at(bboxes[:, 3], ids, cols)
    return labels, bboxes
