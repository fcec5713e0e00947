# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled hot loops: gradient-histogram accumulation, split scans, routing.

Histograms use a ragged per-feature layout: node histograms are flat vectors
of ``total_cells = sum(bins_per_feature)`` entries, feature f occupying
``offsets[f] .. offsets[f] + bins_per_feature[f]``. The ``stats`` array packs
(sum_g, sum_h, count) as its leading axis; counts ride along as float64
(exact for any realistic instance count).

Signatures and floating-point operation order are shared with the numpy
fallback in ``_kernels_py``; the two backends must stay bit-for-bit
interchangeable (see tests/test_kernels.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def hist_accumulate(const cnp.uint16_t[:, ::1] bins,
                    const cnp.int64_t[::1] rows,
                    const cnp.int32_t[::1] slots,
                    const double[::1] g,
                    const double[::1] h,
                    const cnp.int64_t[::1] offsets,
                    double[:, :, ::1] stats):
    """Add (g, h, 1) of each selected row into its (slot, feature, bin) cell.

    ``rows`` are instance indices in ascending order, ``slots[i]`` is the
    histogram slot for ``rows[i]`` (negative = skip). Per-cell additions
    happen in ascending row order, features inner.
    """
    cdef Py_ssize_t i, f
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t n_features = bins.shape[1]
    cdef Py_ssize_t r, s, c
    cdef double gv, hv
    for i in range(n):
        s = slots[i]
        if s < 0:
            continue
        r = rows[i]
        gv = g[r]
        hv = h[r]
        for f in range(n_features):
            c = offsets[f] + bins[r, f]
            stats[0, s, c] += gv
            stats[1, s, c] += hv
            stats[2, s, c] += 1.0


def best_splits(const double[:, :, ::1] stats,
                const cnp.int64_t[::1] offsets,
                const cnp.int64_t[::1] bins_per_feature,
                double reg_lambda,
                double min_gain,
                double min_child):
    """Best positive-gain (feature, threshold) per node histogram.

    Left-to-right prefix scan per feature; gain is
    0.5*(GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) - min_gain, candidates
    need both child counts >= min_child, and the first maximum wins (lowest
    feature, then lowest threshold). feature == -1 marks "no split".
    """
    cdef Py_ssize_t n_nodes = stats.shape[1]
    cdef Py_ssize_t n_features = bins_per_feature.shape[0]
    out_feature = np.full(n_nodes, -1, dtype=np.int32)
    out_threshold = np.zeros(n_nodes, dtype=np.int32)
    out_gain = np.zeros(n_nodes, dtype=np.float64)
    out_left = np.zeros((n_nodes, 3), dtype=np.float64)
    out_right = np.zeros((n_nodes, 3), dtype=np.float64)
    cdef cnp.int32_t[::1] feat_v = out_feature
    cdef cnp.int32_t[::1] thr_v = out_threshold
    cdef double[::1] gain_v = out_gain
    cdef double[:, ::1] left_v = out_left
    cdef double[:, ::1] right_v = out_right
    cdef Py_ssize_t i, f, t, start, nb
    cdef double g_tot, h_tot, c_tot, gl, hl, cl, gr, hr, parent, gain, best_gain
    cdef Py_ssize_t best_f, best_t
    for i in range(n_nodes):
        best_gain = 0.0
        best_f = -1
        best_t = 0
        for f in range(n_features):
            nb = bins_per_feature[f]
            if nb < 2:
                continue
            start = offsets[f]
            g_tot = 0.0
            h_tot = 0.0
            c_tot = 0.0
            for t in range(nb):
                g_tot = g_tot + stats[0, i, start + t]
                h_tot = h_tot + stats[1, i, start + t]
                c_tot = c_tot + stats[2, i, start + t]
            parent = g_tot * g_tot / (h_tot + reg_lambda)
            gl = 0.0
            hl = 0.0
            cl = 0.0
            for t in range(nb - 1):
                gl = gl + stats[0, i, start + t]
                hl = hl + stats[1, i, start + t]
                cl = cl + stats[2, i, start + t]
                if cl < min_child or c_tot - cl < min_child:
                    continue
                gr = g_tot - gl
                hr = h_tot - hl
                gain = 0.5 * ((gl * gl / (hl + reg_lambda)
                               + gr * gr / (hr + reg_lambda)) - parent)
                gain = gain - min_gain
                if isfinite(gain) and gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = t
        if best_f < 0:
            continue
        feat_v[i] = <cnp.int32_t> best_f
        thr_v[i] = <cnp.int32_t> best_t
        gain_v[i] = best_gain
        start = offsets[best_f]
        nb = bins_per_feature[best_f]
        g_tot = 0.0
        h_tot = 0.0
        c_tot = 0.0
        for t in range(nb):
            g_tot = g_tot + stats[0, i, start + t]
            h_tot = h_tot + stats[1, i, start + t]
            c_tot = c_tot + stats[2, i, start + t]
        gl = 0.0
        hl = 0.0
        cl = 0.0
        for t in range(best_t + 1):
            gl = gl + stats[0, i, start + t]
            hl = hl + stats[1, i, start + t]
            cl = cl + stats[2, i, start + t]
        left_v[i, 0] = gl
        left_v[i, 1] = hl
        left_v[i, 2] = cl
        right_v[i, 0] = g_tot - gl
        right_v[i, 1] = h_tot - hl
        right_v[i, 2] = c_tot - cl
    return out_feature, out_threshold, out_gain, out_left, out_right


def predict_rows(const cnp.uint16_t[:, ::1] bins,
                 const cnp.int32_t[::1] feature,
                 const cnp.int32_t[::1] threshold,
                 const cnp.int32_t[::1] left,
                 const cnp.int32_t[::1] right,
                 const double[::1] weight,
                 double[::1] out):
    """Route every row from the root to a leaf and emit the leaf weight.

    Internal nodes have ``feature >= 0``; routing is ``bin <= threshold ->
    left``. Leaves carry the output in ``weight``.
    """
    cdef Py_ssize_t i
    cdef Py_ssize_t n = bins.shape[0]
    cdef cnp.int32_t node
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if bins[i, feature[node]] <= <cnp.uint16_t> threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = weight[node]
