"""Numba-compiled kernels: the default hot path for index build and query.

Mirrors ``_kernels_np`` contract-for-contract. Heaps are manual array heaps
(numba-friendly); tie ordering matches the tuple ordering heapq uses in the
fallback so both backends explore graphs in the same order.
"""
from __future__ import annotations

import numpy as np
from numba import njit

INF32 = np.float32(np.inf)


@njit(cache=True, inline="always")
def _dot(a, b):
    s = np.float32(0.0)
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


# --- min-heap on (score, row); root is the smallest -------------------------

@njit(cache=True, inline="always")
def _less(sa, ra, sb, rb):
    return sa < sb or (sa == sb and ra < rb)


@njit(cache=True)
def _heap_push(hs, hr, size, s, r):
    i = size
    hs[i] = s
    hr[i] = r
    while i > 0:
        p = (i - 1) >> 1
        if _less(hs[i], hr[i], hs[p], hr[p]):
            hs[p], hs[i] = hs[i], hs[p]
            hr[p], hr[i] = hr[i], hr[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_sift_root(hs, hr, size):
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        sm = i
        if l < size and _less(hs[l], hr[l], hs[sm], hr[sm]):
            sm = l
        if r < size and _less(hs[r], hr[r], hs[sm], hr[sm]):
            sm = r
        if sm == i:
            break
        hs[sm], hs[i] = hs[i], hs[sm]
        hr[sm], hr[i] = hr[i], hr[sm]
        i = sm


@njit(cache=True)
def _heap_pop(hs, hr, size):
    size -= 1
    if size > 0:
        hs[0] = hs[size]
        hr[0] = hr[size]
        _heap_sift_root(hs, hr, size)
    return size


@njit(cache=True)
def _heap_replace_root(hs, hr, size, s, r):
    hs[0] = s
    hr[0] = r
    _heap_sift_root(hs, hr, size)


# --- scoring -----------------------------------------------------------------

@njit(cache=True)
def score_rows(data, rows, q):
    m = rows.shape[0]
    out = np.empty(m, dtype=np.float32)
    for i in range(m):
        out[i] = _dot(data[rows[i]], q)
    return out


# --- HNSW --------------------------------------------------------------------

@njit(cache=True, inline="always")
def _nbr_base(nbr_off, cap0, M, node, layer):
    if layer == 0:
        return nbr_off[node]
    return nbr_off[node] + cap0 + (layer - 1) * M


@njit(cache=True)
def _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer):
    best = _dot(data[ep], q)
    improved = True
    while improved:
        improved = False
        cur = ep
        base = _nbr_base(nbr_off, cap0, M, cur, layer)
        cnt = cnts[cnt_off[cur] + layer]
        for t in range(cnt):
            nb = nbrs[base + t]
            s = _dot(data[nb], q)
            if s > best:
                best = s
                ep = nb
                improved = True
    return ep


@njit(cache=True)
def _search_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, ef, layer,
                  visited, epoch, res_s, res_r, cand_s, cand_r):
    s0 = _dot(data[ep], q)
    visited[ep] = epoch
    nres = _heap_push(res_s, res_r, 0, s0, ep)
    ncand = _heap_push(cand_s, cand_r, 0, -s0, ep)
    while ncand > 0:
        c_s = -cand_s[0]
        c_r = cand_r[0]
        ncand = _heap_pop(cand_s, cand_r, ncand)
        if nres >= ef and c_s < res_s[0]:
            break
        base = _nbr_base(nbr_off, cap0, M, c_r, layer)
        ci = cnt_off[c_r] + layer
        for t in range(cnts[ci]):
            nb = nbrs[base + t]
            if visited[nb] == epoch:
                continue
            visited[nb] = epoch
            s = _dot(data[nb], q)
            if nres < ef:
                nres = _heap_push(res_s, res_r, nres, s, nb)
                ncand = _heap_push(cand_s, cand_r, ncand, -s, nb)
            elif s > res_s[0]:
                _heap_replace_root(res_s, res_r, nres, s, nb)
                ncand = _heap_push(cand_s, cand_r, ncand, -s, nb)
    return nres


@njit(cache=True)
def _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, a, b, layer):
    base = _nbr_base(nbr_off, cap0, M, a, layer)
    cap = cap0 if layer == 0 else M
    ci = cnt_off[a] + layer
    c = cnts[ci]
    for t in range(c):
        if nbrs[base + t] == b:
            return
    if c < cap:
        nbrs[base + c] = b
        cnts[ci] = c + 1
        return
    s_new = _dot(data[b], data[a])
    worst_j = -1
    worst_s = INF32
    for t in range(cap):
        s = _dot(data[nbrs[base + t]], data[a])
        if s < worst_s:
            worst_s = s
            worst_j = t
    if s_new > worst_s:
        nbrs[base + worst_j] = b


@njit(cache=True)
def hnsw_build(data, levels, nbr_off, cnt_off, nbrs, cnts, M, ef_construction):
    n = data.shape[0]
    cap0 = 2 * M
    visited = np.zeros(n, dtype=np.int64)
    epoch = 0
    res_s = np.empty(ef_construction + 1, dtype=np.float32)
    res_r = np.empty(ef_construction + 1, dtype=np.int32)
    cand_s = np.empty(n + 1, dtype=np.float32)
    cand_r = np.empty(n + 1, dtype=np.int32)
    entry = -1
    maxl = -1
    for i in range(n):
        li = levels[i]
        if entry < 0:
            entry = i
            maxl = li
            continue
        q = data[i]
        ep = entry
        layer = maxl
        while layer > li:
            ep = _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer)
            layer -= 1
        top = li if li < maxl else maxl
        for layer in range(top, -1, -1):
            epoch += 1
            nres = _search_layer(
                data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q,
                ef_construction, layer, visited, epoch,
                res_s, res_r, cand_s, cand_r,
            )
            # select the M best results by (score desc, row asc)
            msel = M if M < nres else nres
            best_row = -1
            for j in range(msel):
                bs = -INF32
                br = -1
                bt = -1
                for t in range(nres):
                    r = res_r[t]
                    if r < 0:
                        continue
                    s = res_s[t]
                    if br < 0 or s > bs or (s == bs and r < br):
                        bs = s
                        br = r
                        bt = t
                res_r[bt] = -1
                if j == 0:
                    best_row = br
                _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, i, br, layer)
                _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, br, i, layer)
            ep = best_row
        if li > maxl:
            entry = i
            maxl = li
    return entry, maxl


@njit(cache=True)
def hnsw_search(data, nbr_off, cnt_off, nbrs, cnts, M, entry, maxl, q, ef, visited):
    cap0 = 2 * M
    ep = entry
    for layer in range(maxl, 0, -1):
        ep = _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer)
    res_s = np.empty(ef + 1, dtype=np.float32)
    res_r = np.empty(ef + 1, dtype=np.int32)
    cand_s = np.empty(data.shape[0] + 1, dtype=np.float32)
    cand_r = np.empty(data.shape[0] + 1, dtype=np.int32)
    nres = _search_layer(
        data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, ef, 0,
        visited, 1, res_s, res_r, cand_s, cand_r,
    )
    return res_r[:nres].copy(), res_s[:nres].copy()


# --- random-projection forest --------------------------------------------------

@njit(cache=True, inline="always")
def _pless(pa, na, pb, nb):
    # max-heap priority order: higher p first, ties by smaller node id
    return pa > pb or (pa == pb and na < nb)


@njit(cache=True)
def _pq_push(hp, hn, size, p, node):
    i = size
    hp[i] = p
    hn[i] = node
    while i > 0:
        par = (i - 1) >> 1
        if _pless(hp[i], hn[i], hp[par], hn[par]):
            hp[par], hp[i] = hp[i], hp[par]
            hn[par], hn[i] = hn[i], hn[par]
            i = par
        else:
            break
    return size + 1


@njit(cache=True)
def _pq_pop(hp, hn, size):
    size -= 1
    if size > 0:
        hp[0] = hp[size]
        hn[0] = hn[size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            top = i
            if l < size and _pless(hp[l], hn[l], hp[top], hn[top]):
                top = l
            if r < size and _pless(hp[r], hn[r], hp[top], hn[top]):
                top = r
            if top == i:
                break
            hp[top], hp[i] = hp[i], hp[top]
            hn[top], hn[i] = hn[i], hn[top]
            i = top
    return size


@njit(cache=True)
def forest_traverse(node_left, node_right, node_split, split_w, split_b,
                    leaf_start, leaf_count, leaf_items, roots, q, search_k,
                    n_rows, seen):
    cap = node_left.shape[0] + roots.shape[0] + 2
    hp = np.empty(cap, dtype=np.float32)
    hn = np.empty(cap, dtype=np.int32)
    hsize = 0
    for t in range(roots.shape[0]):
        hsize = _pq_push(hp, hn, hsize, INF32, roots[t])
    cand = np.empty(n_rows, dtype=np.int32)
    ncand = 0
    while hsize > 0 and ncand < search_k:
        p = hp[0]
        node = hn[0]
        hsize = _pq_pop(hp, hn, hsize)
        si = node_split[node]
        if si < 0:
            st = leaf_start[node]
            for t in range(leaf_count[node]):
                row = leaf_items[st + t]
                if seen[row] == 0:
                    seen[row] = 1
                    cand[ncand] = row
                    ncand += 1
        else:
            m = _dot(split_w[si], q) - split_b[si]
            lp = p if p < m else m
            rp = p if p < -m else -m
            hsize = _pq_push(hp, hn, hsize, lp, node_left[node])
            hsize = _pq_push(hp, hn, hsize, rp, node_right[node])
    return cand[:ncand].copy()
