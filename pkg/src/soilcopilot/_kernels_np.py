"""NumPy fallback for the hot pixel kernels.

Same contracts as the compiled module ``soilcopilot._fastkern``; used when the
extension is not built or when SOILCOPILOT_PURE_PYTHON is set. NaN samples are
invalid and never contribute to sums or counts.
"""

from __future__ import annotations

import numpy as np


def _pad_to_blocks(a: np.ndarray, win_h: int, win_w: int, fill) -> np.ndarray:
    h, w = a.shape
    ph = (-h) % win_h
    pw = (-w) % win_w
    if ph or pw:
        a = np.pad(a, ((0, ph), (0, pw)), constant_values=fill)
    return a


def _block_sum(a: np.ndarray, win_h: int, win_w: int) -> np.ndarray:
    h, w = a.shape
    return a.reshape(h // win_h, win_h, w // win_w, win_w).sum(axis=(1, 3))


def block_sum_count(values: np.ndarray, win_h: int, win_w: int):
    """Per-block sum and valid-sample count of a float64 grid."""
    valid = np.isfinite(values)
    filled = _pad_to_blocks(np.where(valid, values, 0.0), win_h, win_w, 0.0)
    counts = _pad_to_blocks(valid.astype(np.int64), win_h, win_w, 0)
    return _block_sum(filled, win_h, win_w), _block_sum(counts, win_h, win_w)


def coherence_block_sums(s1: np.ndarray, s2: np.ndarray, win_h: int, win_w: int):
    """Per-block cross-product and power sums over jointly valid samples.

    Returns (num, p1, p2, count): num = sum(s1 * conj(s2)) complex128,
    p1 = sum(|s1|^2), p2 = sum(|s2|^2), count = valid samples per block.
    """
    valid = np.isfinite(s1) & np.isfinite(s2)
    cross = np.where(valid, s1 * np.conj(s2), 0.0 + 0.0j)
    p1 = np.where(valid, s1.real * s1.real + s1.imag * s1.imag, 0.0)
    p2 = np.where(valid, s2.real * s2.real + s2.imag * s2.imag, 0.0)
    num = _block_sum(_pad_to_blocks(cross, win_h, win_w, 0.0 + 0.0j), win_h, win_w)
    p1s = _block_sum(_pad_to_blocks(p1, win_h, win_w, 0.0), win_h, win_w)
    p2s = _block_sum(_pad_to_blocks(p2, win_h, win_w, 0.0), win_h, win_w)
    counts = _block_sum(_pad_to_blocks(valid.astype(np.int64), win_h, win_w, 0),
                        win_h, win_w)
    return num, p1s, p2s, counts


def label_scan(mask: np.ndarray):
    """4-connected component labels of a boolean grid, ids in scan order.

    Returns (labels int32 with -1 background, n_labels). Implemented as
    iterative min-index propagation: each pass takes the minimum linear index
    over the 4-neighbourhood until a fixpoint, so every component ends up
    carrying the linear index of its first pixel in row-major order; those
    indices are then compressed to 0..n-1.
    """
    mask = mask.astype(bool)
    h, w = mask.shape
    n = h * w
    sentinel = n
    idx = np.where(mask, np.arange(n, dtype=np.int64).reshape(h, w), sentinel)
    while True:
        nxt = idx.copy()
        nxt[1:, :] = np.minimum(nxt[1:, :], idx[:-1, :])
        nxt[:-1, :] = np.minimum(nxt[:-1, :], idx[1:, :])
        nxt[:, 1:] = np.minimum(nxt[:, 1:], idx[:, :-1])
        nxt[:, :-1] = np.minimum(nxt[:, :-1], idx[:, 1:])
        nxt[~mask] = sentinel
        if np.array_equal(nxt, idx):
            break
        idx = nxt
    labels = np.full((h, w), -1, dtype=np.int32)
    flat_roots = idx[mask]
    roots = np.unique(flat_roots)
    labels[mask] = np.searchsorted(roots, flat_roots).astype(np.int32)
    return labels, len(roots)
