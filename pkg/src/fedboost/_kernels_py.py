"""Pure-numpy fallback for the compiled kernels.

Bit-for-bit interchangeable with ``_kernels``: per-cell float additions run
in the same order (ascending row, features inner — ``np.bincount`` walks its
input sequentially), prefix sums use sequential ``np.cumsum``, and routing
performs no float arithmetic at all. See ``_kernels.pyx`` for the ragged
histogram layout.
"""

import numpy as np


def hist_accumulate(bins, rows, slots, g, h, offsets, stats):
    keep = slots >= 0
    r = rows[keep]
    if r.size == 0:
        return
    s = slots[keep].astype(np.int64)
    n_features = bins.shape[1]
    total_cells = stats.shape[2]
    # flat row-major order == (instance, feature) loop order of the C kernel
    cells = s[:, None] * total_cells + offsets[None, :] + bins[r, :]
    cells = cells.ravel()
    size = stats.shape[1] * total_cells
    gw = np.repeat(g[r], n_features)
    hw = np.repeat(h[r], n_features)
    shape = (stats.shape[1], total_cells)
    stats[0] += np.bincount(cells, weights=gw, minlength=size).reshape(shape)
    stats[1] += np.bincount(cells, weights=hw, minlength=size).reshape(shape)
    stats[2] += np.bincount(cells, minlength=size).reshape(shape)


def best_splits(stats, offsets, bins_per_feature, reg_lambda, min_gain, min_child):
    n_nodes = stats.shape[1]
    n_features = bins_per_feature.shape[0]
    out_feature = np.full(n_nodes, -1, dtype=np.int32)
    out_threshold = np.zeros(n_nodes, dtype=np.int32)
    out_gain = np.zeros(n_nodes, dtype=np.float64)
    out_left = np.zeros((n_nodes, 3), dtype=np.float64)
    out_right = np.zeros((n_nodes, 3), dtype=np.float64)
    if n_nodes == 0:
        return out_feature, out_threshold, out_gain, out_left, out_right
    best_gain = np.zeros(n_nodes, dtype=np.float64)
    for f in range(n_features):
        nb = int(bins_per_feature[f])
        if nb < 2:
            continue
        start = int(offsets[f])
        gl = np.cumsum(stats[0, :, start : start + nb], axis=1)
        hl = np.cumsum(stats[1, :, start : start + nb], axis=1)
        cl = np.cumsum(stats[2, :, start : start + nb], axis=1)
        g_tot = gl[:, -1:]
        h_tot = hl[:, -1:]
        c_tot = cl[:, -1:]
        gl = gl[:, :-1]
        hl = hl[:, :-1]
        cl = cl[:, :-1]
        gr = g_tot - gl
        hr = h_tot - hl
        cr = c_tot - cl
        with np.errstate(divide="ignore", invalid="ignore"):
            parent = g_tot * g_tot / (h_tot + reg_lambda)
            gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent)
        gain = gain - min_gain
        valid = (cl >= min_child) & (cr >= min_child)
        gain = np.where(valid & np.isfinite(gain), gain, -np.inf)
        t_best = np.argmax(gain, axis=1)  # first maximum -> lowest threshold
        g_best = gain[np.arange(n_nodes), t_best]
        better = g_best > best_gain  # strict: earlier features win ties
        if not np.any(better):
            continue
        idx = np.flatnonzero(better)
        tb = t_best[idx]
        best_gain[idx] = g_best[idx]
        out_feature[idx] = f
        out_threshold[idx] = tb
        out_gain[idx] = g_best[idx]
        out_left[idx, 0] = gl[idx, tb]
        out_left[idx, 1] = hl[idx, tb]
        out_left[idx, 2] = cl[idx, tb]
        out_right[idx, 0] = gr[idx, tb]
        out_right[idx, 1] = hr[idx, tb]
        out_right[idx, 2] = cr[idx, tb]
    return out_feature, out_threshold, out_gain, out_left, out_right


def predict_rows(bins, feature, threshold, left, right, weight, out):
    n = bins.shape[0]
    node = np.zeros(n, dtype=np.int32)
    active = np.flatnonzero(feature[node] >= 0).astype(np.int64)
    while active.size:
        nd = node[active]
        bv = bins[active, feature[nd]]
        go_left = bv <= threshold[nd].astype(np.uint16)
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    out[:] = weight[node]
