# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: windowed block sums and 4-connected labeling.

Contracts mirror soilcopilot._kernels_np exactly; the dispatcher in
soilcopilot.kernels picks between the two at import.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def block_sum_count(const double[:, ::1] values, Py_ssize_t win_h, Py_ssize_t win_w):
    cdef Py_ssize_t h = values.shape[0]
    cdef Py_ssize_t w = values.shape[1]
    cdef Py_ssize_t bh = (h + win_h - 1) // win_h
    cdef Py_ssize_t bw = (w + win_w - 1) // win_w
    sums_arr = np.zeros((bh, bw), dtype=np.float64)
    counts_arr = np.zeros((bh, bw), dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t r, c, br, bc
    cdef double v
    with nogil:
        for r in range(h):
            br = r // win_h
            for c in range(w):
                v = values[r, c]
                if isfinite(v):
                    bc = c // win_w
                    sums[br, bc] += v
                    counts[br, bc] += 1
    return sums_arr, counts_arr


def coherence_block_sums(const double complex[:, ::1] s1,
                         const double complex[:, ::1] s2,
                         Py_ssize_t win_h, Py_ssize_t win_w):
    cdef Py_ssize_t h = s1.shape[0]
    cdef Py_ssize_t w = s1.shape[1]
    cdef Py_ssize_t bh = (h + win_h - 1) // win_h
    cdef Py_ssize_t bw = (w + win_w - 1) // win_w
    num_re_arr = np.zeros((bh, bw), dtype=np.float64)
    num_im_arr = np.zeros((bh, bw), dtype=np.float64)
    p1_arr = np.zeros((bh, bw), dtype=np.float64)
    p2_arr = np.zeros((bh, bw), dtype=np.float64)
    counts_arr = np.zeros((bh, bw), dtype=np.int64)
    cdef double[:, ::1] num_re = num_re_arr
    cdef double[:, ::1] num_im = num_im_arr
    cdef double[:, ::1] p1 = p1_arr
    cdef double[:, ::1] p2 = p2_arr
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t r, c, br, bc
    cdef double complex a, b
    cdef double ar, ai, br_, bi
    with nogil:
        for r in range(h):
            br = r // win_h
            for c in range(w):
                a = s1[r, c]
                b = s2[r, c]
                ar = a.real; ai = a.imag
                br_ = b.real; bi = b.imag
                if isfinite(ar) and isfinite(ai) and isfinite(br_) and isfinite(bi):
                    bc = c // win_w
                    # a * conj(b)
                    num_re[br, bc] += ar * br_ + ai * bi
                    num_im[br, bc] += ai * br_ - ar * bi
                    p1[br, bc] += ar * ar + ai * ai
                    p2[br, bc] += br_ * br_ + bi * bi
                    counts[br, bc] += 1
    num_arr = num_re_arr + 1j * num_im_arr
    return num_arr, p1_arr, p2_arr, counts_arr


def label_scan(const cnp.uint8_t[:, ::1] mask):
    """4-connected labels in row-major discovery order; returns (labels, n)."""
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    labels_arr = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = labels_arr
    stack_arr = np.empty(h * w if h * w else 1, dtype=np.int64)
    cdef cnp.int64_t[::1] stack = stack_arr
    cdef Py_ssize_t r, c, rr, cc, top
    cdef cnp.int64_t p
    cdef cnp.int32_t next_label = 0
    with nogil:
        for r in range(h):
            for c in range(w):
                if mask[r, c] != 0 and labels[r, c] < 0:
                    labels[r, c] = next_label
                    top = 0
                    stack[top] = r * w + c
                    top += 1
                    while top > 0:
                        top -= 1
                        p = stack[top]
                        rr = p // w
                        cc = p % w
                        if rr > 0 and mask[rr - 1, cc] != 0 and labels[rr - 1, cc] < 0:
                            labels[rr - 1, cc] = next_label
                            stack[top] = p - w
                            top += 1
                        if rr + 1 < h and mask[rr + 1, cc] != 0 and labels[rr + 1, cc] < 0:
                            labels[rr + 1, cc] = next_label
                            stack[top] = p + w
                            top += 1
                        if cc > 0 and mask[rr, cc - 1] != 0 and labels[rr, cc - 1] < 0:
                            labels[rr, cc - 1] = next_label
                            stack[top] = p - 1
                            top += 1
                        if cc + 1 < w and mask[rr, cc + 1] != 0 and labels[rr, cc + 1] < 0:
                            labels[rr, cc + 1] = next_label
                            stack[top] = p + 1
                            top += 1
                    next_label += 1
    return labels_arr, int(next_label)
