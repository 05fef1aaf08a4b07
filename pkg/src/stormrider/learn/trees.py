"""Histogram-based tree growing kernels.

One grower serves both ensemble flavours.  Features are pre-binned once
per fit into integer codes against per-feature quantile edges; every node
then accumulates per-bin gradient/hessian/count histograms and scans the
bin boundaries for the split maximising

    gain = 1/2 [ G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - (G_L+G_R)^2/(H_L+H_R+lam) ] - gamma

splitting only while gain stays strictly positive and both children keep
min_obs rows.  Leaf values are the Newton step -G/(H+lam).  A random
forest is the same machinery run with g = -y, h = 1, lam = gamma = 0,
where the gain reduces to half the variance reduction and the leaf value
to the leaf mean.

The kernels are numba-compiled, single-threaded and allocation-stable, so
results are bit-reproducible regardless of how many trees run in
parallel.  Per-node feature sampling (mtry) draws from a splitmix64
stream seeded per tree, never from scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_TOTAL_BINS = 65535  # codes are uint16

_U = np.uint64


@njit(cache=True, nogil=True, inline="always")
def _splitmix64(state):
    """Advance a splitmix64 stream; returns (new_state, draw)."""
    state = state + _U(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    z = z ^ (z >> _U(31))
    return state, z


@njit(cache=True, nogil=True)
def grow_tree(codes_t, rows, g, h, n_bins, feats, n_features, mtry,
              max_depth, min_obs, lam, gamma, seed):
    """Grow one tree depth-first over a row subsample.

    codes_t : (F, N) uint16 binned feature matrix, feature-major
    rows    : int64 row ids this tree trains on
    g, h    : float64 gradient/hessian per row (length N)
    n_bins  : int64 per-feature bin count
    feats   : int64 candidate feature ids for this tree
    mtry    : 0 to scan every candidate feature at every node, else the
              number of features sampled per node without replacement
    seed    : uint64 stream for the per-node feature draws

    Returns (n_nodes, feature, bin, left, right, value, gain, feat_gain).
    Nodes are in depth-first preorder; feature == -1 marks a leaf.
    """
    n = rows.size
    cap = 2 * n + 1
    node_feat = np.full(cap, -1, np.int64)
    node_bin = np.zeros(cap, np.int64)
    node_left = np.full(cap, -1, np.int64)
    node_right = np.full(cap, -1, np.int64)
    node_value = np.zeros(cap, np.float64)
    node_gain = np.zeros(cap, np.float64)
    feat_gain = np.zeros(n_features, np.float64)

    pos = rows.copy()
    tmp = np.empty(n, np.int64)

    max_nb = 0
    for f in range(feats.size):
        if n_bins[feats[f]] > max_nb:
            max_nb = n_bins[feats[f]]
    hist_g = np.zeros(max(max_nb, 1), np.float64)
    hist_h = np.zeros(max(max_nb, 1), np.float64)
    hist_c = np.zeros(max(max_nb, 1), np.int64)

    scratch = feats.copy()
    use_mtry = 0 < mtry < feats.size

    depth_cap = max_depth if max_depth < n else n
    scap = 2 * depth_cap + 4
    st_node = np.empty(scap, np.int64)
    st_start = np.empty(scap, np.int64)
    st_end = np.empty(scap, np.int64)
    st_depth = np.empty(scap, np.int64)

    state = seed
    sp = 0
    st_node[sp] = 0
    st_start[sp] = 0
    st_end[sp] = n
    st_depth[sp] = 0
    sp += 1
    next_node = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        count = end - start

        gtot = 0.0
        htot = 0.0
        for i in range(start, end):
            r = pos[i]
            gtot += g[r]
            htot += h[r]
        node_value[node] = -gtot / (htot + lam)

        best_gain = 0.0
        best_f = -1
        best_b = -1
        if depth < max_depth and count >= 2 * min_obs:
            parent_term = gtot * gtot / (htot + lam)
            if use_mtry:
                for t in range(feats.size):
                    scratch[t] = feats[t]
                for t in range(mtry):
                    state, z = _splitmix64(state)
                    j = t + np.int64(z % _U(feats.size - t))
                    swap = scratch[t]
                    scratch[t] = scratch[j]
                    scratch[j] = swap
                n_cand = mtry
            else:
                n_cand = feats.size
            cand = scratch if use_mtry else feats

            for fi in range(n_cand):
                f = cand[fi]
                nb = n_bins[f]
                if nb < 2:
                    continue
                for b in range(nb):
                    hist_g[b] = 0.0
                    hist_h[b] = 0.0
                    hist_c[b] = 0
                col = codes_t[f]
                for i in range(start, end):
                    r = pos[i]
                    c = col[r]
                    hist_g[c] += g[r]
                    hist_h[c] += h[r]
                    hist_c[c] += 1
                gl = 0.0
                hl = 0.0
                cl = 0
                for b in range(nb - 1):
                    gl += hist_g[b]
                    hl += hist_h[b]
                    cl += hist_c[b]
                    if cl < min_obs:
                        continue
                    if count - cl < min_obs:
                        break  # the right side only shrinks from here
                    gr = gtot - gl
                    hr = htot - hl
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                  - parent_term) - gamma
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_b = b

        if best_f >= 0:
            node_feat[node] = best_f
            node_bin[node] = best_b
            node_gain[node] = best_gain
            feat_gain[best_f] += best_gain

            col = codes_t[best_f]
            nl = 0
            for i in range(start, end):
                r = pos[i]
                if col[r] <= best_b:
                    tmp[nl] = r
                    nl += 1
            k = nl
            for i in range(start, end):
                r = pos[i]
                if col[r] > best_b:
                    tmp[k] = r
                    k += 1
            for i in range(count):
                pos[start + i] = tmp[i]

            lid = next_node
            rid = next_node + 1
            next_node += 2
            node_left[node] = lid
            node_right[node] = rid
            st_node[sp] = rid
            st_start[sp] = start + nl
            st_end[sp] = end
            st_depth[sp] = depth + 1
            sp += 1
            st_node[sp] = lid
            st_start[sp] = start
            st_end[sp] = start + nl
            st_depth[sp] = depth + 1
            sp += 1

    return (next_node, node_feat[:next_node], node_bin[:next_node],
            node_left[:next_node], node_right[:next_node],
            node_value[:next_node], node_gain[:next_node], feat_gain)


@njit(cache=True, nogil=True)
def _fill_hist(hist, cnt, slot, codes_t, feats, n_bins, gh, pos, start, end):
    """Accumulate per-bin gradient/hessian/count histograms for one node."""
    for fi in range(feats.size):
        f = feats[fi]
        nb = n_bins[f]
        for b in range(nb):
            hist[slot, fi, b, 0] = 0.0
            hist[slot, fi, b, 1] = 0.0
            cnt[slot, fi, b] = 0
        col = codes_t[f]
        for i in range(start, end):
            r = pos[i]
            c = col[r]
            hist[slot, fi, c, 0] += gh[r, 0]
            hist[slot, fi, c, 1] += gh[r, 1]
            cnt[slot, fi, c] += 1


@njit(cache=True, nogil=True)
def grow_tree_hist(codes_t, rows, gh, n_bins, feats, n_features,
                   max_depth, min_obs, lam, gamma):
    """Grow one boosting tree with the histogram-subtraction trick.

    Same split rule and outputs as grow_tree, but the candidate feature
    set is fixed for the whole tree (no per-node sampling), which lets
    each split compute a fresh histogram only for the smaller child and
    derive the sibling's by subtracting from the parent's.
    """
    n = rows.size
    cap = 2 * n + 1
    node_feat = np.full(cap, -1, np.int64)
    node_bin = np.zeros(cap, np.int64)
    node_left = np.full(cap, -1, np.int64)
    node_right = np.full(cap, -1, np.int64)
    node_value = np.zeros(cap, np.float64)
    node_gain = np.zeros(cap, np.float64)
    feat_gain = np.zeros(n_features, np.float64)

    pos = rows.copy()
    tmp = np.empty(n, np.int64)

    f_sub = feats.size
    max_nb = 1
    for fi in range(f_sub):
        if n_bins[feats[fi]] > max_nb:
            max_nb = n_bins[feats[fi]]

    depth_cap = max_depth if max_depth < n else n
    scap = 2 * depth_cap + 4
    hist = np.zeros((scap, f_sub, max_nb, 2), np.float64)
    cnt = np.zeros((scap, f_sub, max_nb), np.int64)
    free = np.empty(scap, np.int64)
    for i in range(scap):
        free[i] = scap - 1 - i
    nfree = scap

    st_node = np.empty(scap, np.int64)
    st_start = np.empty(scap, np.int64)
    st_end = np.empty(scap, np.int64)
    st_depth = np.empty(scap, np.int64)
    st_slot = np.empty(scap, np.int64)
    st_has = np.empty(scap, np.uint8)

    sp = 0
    st_node[sp] = 0
    st_start[sp] = 0
    st_end[sp] = n
    st_depth[sp] = 0
    st_slot[sp] = -1
    st_has[sp] = 0
    sp += 1
    next_node = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        slot = st_slot[sp]
        has = st_has[sp]
        count = end - start

        gtot = 0.0
        htot = 0.0
        for i in range(start, end):
            r = pos[i]
            gtot += gh[r, 0]
            htot += gh[r, 1]
        node_value[node] = -gtot / (htot + lam)

        best_gain = 0.0
        best_fi = -1
        best_b = -1
        if depth < max_depth and count >= 2 * min_obs:
            if not has:
                if slot < 0:
                    nfree -= 1
                    slot = free[nfree]
                _fill_hist(hist, cnt, slot, codes_t, feats, n_bins, gh,
                           pos, start, end)
            parent_term = gtot * gtot / (htot + lam)
            for fi in range(f_sub):
                nb = n_bins[feats[fi]]
                if nb < 2:
                    continue
                gl = 0.0
                hl = 0.0
                cl = 0
                for b in range(nb - 1):
                    gl += hist[slot, fi, b, 0]
                    hl += hist[slot, fi, b, 1]
                    cl += cnt[slot, fi, b]
                    if cl < min_obs:
                        continue
                    if count - cl < min_obs:
                        break
                    gr = gtot - gl
                    hr = htot - hl
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                  - parent_term) - gamma
                    if gain > best_gain:
                        best_gain = gain
                        best_fi = fi
                        best_b = b

        if best_fi < 0:
            if slot >= 0:
                free[nfree] = slot
                nfree += 1
            continue

        best_f = feats[best_fi]
        node_feat[node] = best_f
        node_bin[node] = best_b
        node_gain[node] = best_gain
        feat_gain[best_f] += best_gain

        col = codes_t[best_f]
        nl = 0
        for i in range(start, end):
            r = pos[i]
            if col[r] <= best_b:
                tmp[nl] = r
                nl += 1
        k = nl
        for i in range(start, end):
            r = pos[i]
            if col[r] > best_b:
                tmp[k] = r
                k += 1
        for i in range(count):
            pos[start + i] = tmp[i]
        nr = count - nl

        lid = next_node
        rid = next_node + 1
        next_node += 2
        node_left[node] = lid
        node_right[node] = rid

        cdepth = depth + 1
        lcan = cdepth < max_depth and nl >= 2 * min_obs
        rcan = cdepth < max_depth and nr >= 2 * min_obs
        lslot = np.int64(-1)
        rslot = np.int64(-1)
        lhas = np.uint8(0)
        rhas = np.uint8(0)
        small_is_left = nl <= nr
        if small_is_left:
            s_start = start
            s_end = start + nl
            small_can = lcan
            large_can = rcan
        else:
            s_start = start + nl
            s_end = end
            small_can = rcan
            large_can = lcan

        if large_can:
            # fresh histogram for the smaller child, sibling by subtraction
            nfree -= 1
            ns = free[nfree]
            _fill_hist(hist, cnt, ns, codes_t, feats, n_bins, gh,
                       pos, s_start, s_end)
            for fi in range(f_sub):
                nb = n_bins[feats[fi]]
                for b in range(nb):
                    hist[slot, fi, b, 0] -= hist[ns, fi, b, 0]
                    hist[slot, fi, b, 1] -= hist[ns, fi, b, 1]
                    cnt[slot, fi, b] -= cnt[ns, fi, b]
            if not small_can:
                free[nfree] = ns
                nfree += 1
                ns = np.int64(-1)
            if small_is_left:
                lslot = ns
                lhas = np.uint8(1) if ns >= 0 else np.uint8(0)
                rslot = slot
                rhas = np.uint8(1)
            else:
                rslot = ns
                rhas = np.uint8(1) if ns >= 0 else np.uint8(0)
                lslot = slot
                lhas = np.uint8(1)
        elif small_can:
            # parent histogram is dead weight: reuse its slot for the child
            _fill_hist(hist, cnt, slot, codes_t, feats, n_bins, gh,
                       pos, s_start, s_end)
            if small_is_left:
                lslot = slot
                lhas = np.uint8(1)
            else:
                rslot = slot
                rhas = np.uint8(1)
        else:
            free[nfree] = slot
            nfree += 1

        st_node[sp] = rid
        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = cdepth
        st_slot[sp] = rslot
        st_has[sp] = rhas
        sp += 1
        st_node[sp] = lid
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = cdepth
        st_slot[sp] = lslot
        st_has[sp] = lhas
        sp += 1

    return (next_node, node_feat[:next_node], node_bin[:next_node],
            node_left[:next_node], node_right[:next_node],
            node_value[:next_node], node_gain[:next_node], feat_gain)


@njit(cache=True, nogil=True)
def apply_tree_binned(codes_t, feature, bin_, left, right, value, out):
    """Leaf value per row, routing on binned codes (training-time path)."""
    for r in range(out.size):
        node = 0
        while feature[node] >= 0:
            if codes_t[feature[node], r] <= bin_[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]


@njit(cache=True, nogil=True)
def apply_tree_values(x, feature, threshold, left, right, value, out):
    """Leaf value per row of a raw (n, F) float matrix.

    Thresholds are the bin edges the tree split on, so routing here is
    exactly equivalent to the binned routing used during training.
    """
    for r in range(out.size):
        node = 0
        while feature[node] >= 0:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]


def quantile_bin_edges(x: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Per-feature split candidate edges, frozen before any boosting round.

    Edges are the interior (1/n_bins .. (n_bins-1)/n_bins) quantiles of
    each training column, deduplicated.  A constant column yields no
    edges and therefore never splits.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if n_bins > MAX_TOTAL_BINS:
        raise ValueError(f"n_bins must be <= {MAX_TOTAL_BINS}")
    qs = np.arange(1, n_bins) / n_bins
    edges = []
    for j in range(x.shape[1]):
        col = x[:, j]
        e = np.unique(np.quantile(col, qs))
        edges.append(e.astype(np.float64))
    return edges


def bin_columns(x: np.ndarray, edges: list[np.ndarray]):
    """Bin a feature matrix against frozen edges.

    Returns (codes_t, n_bins): codes_t is feature-major uint16 with
    code(v) = number of edges strictly below v, so code(v) <= b exactly
    when v <= edges[b].
    """
    n, F = x.shape
    codes_t = np.empty((F, n), dtype=np.uint16)
    n_bins = np.empty(F, dtype=np.int64)
    for f in range(F):
        codes_t[f] = np.searchsorted(edges[f], x[:, f], side="left").astype(np.uint16)
        n_bins[f] = len(edges[f]) + 1
    return codes_t, n_bins
