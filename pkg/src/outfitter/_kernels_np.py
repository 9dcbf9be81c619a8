"""Pure numpy/python kernels: the fallback path when numba is disabled.

Same contracts as the numba twins in ``_kernels_nb``; correctness-equivalent
but slower on graph/tree traversal, which is dominated by per-node hops.
"""
from __future__ import annotations

import heapq

import numpy as np


def score_rows(data: np.ndarray, rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Inner products of the selected rows with q (float32)."""
    if rows.size == 0:
        return np.empty(0, dtype=np.float32)
    return data[rows] @ q


def _slot(nbr_off, cnt_off, cap0, M, node, layer):
    base = nbr_off[node] + (0 if layer == 0 else cap0 + (layer - 1) * M)
    cap = cap0 if layer == 0 else M
    return base, cap, cnt_off[node] + layer


def _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer):
    best = float(np.dot(data[ep], q))
    improved = True
    while improved:
        improved = False
        base, _, ci = _slot(nbr_off, cnt_off, cap0, M, ep, layer)
        for t in range(cnts[ci]):
            nb = int(nbrs[base + t])
            s = float(np.dot(data[nb], q))
            if s > best:
                best = s
                ep = nb
                improved = True
    return ep


def _search_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, ef, layer,
                  visited, epoch):
    """Beam search over one layer; returns (rows, scores) of up to ef best."""
    s0 = float(np.dot(data[ep], q))
    visited[ep] = epoch
    results: list[tuple[float, int]] = [(s0, ep)]  # min-heap on score
    candidates: list[tuple[float, int]] = [(-s0, ep)]  # max-heap via negation
    while candidates:
        neg_s, row = heapq.heappop(candidates)
        if len(results) >= ef and -neg_s < results[0][0]:
            break
        base, _, ci = _slot(nbr_off, cnt_off, cap0, M, row, layer)
        for t in range(cnts[ci]):
            nb = int(nbrs[base + t])
            if visited[nb] == epoch:
                continue
            visited[nb] = epoch
            s = float(np.dot(data[nb], q))
            if len(results) < ef:
                heapq.heappush(results, (s, nb))
                heapq.heappush(candidates, (-s, nb))
            elif s > results[0][0]:
                heapq.heapreplace(results, (s, nb))
                heapq.heappush(candidates, (-s, nb))
    rows = np.fromiter((r for _, r in results), dtype=np.int32, count=len(results))
    scores = np.fromiter((s for s, _ in results), dtype=np.float32, count=len(results))
    return rows, scores


def hnsw_build(data, levels, nbr_off, cnt_off, nbrs, cnts, M, ef_construction):
    """Populate the preallocated adjacency pools; returns (entry, max_level)."""
    n = data.shape[0]
    cap0 = 2 * M
    visited = np.zeros(n, dtype=np.int64)
    epoch = 0
    entry = -1
    maxl = -1
    for i in range(n):
        li = int(levels[i])
        if entry < 0:
            entry, maxl = i, li
            continue
        q = data[i]
        ep = entry
        for layer in range(maxl, li, -1):
            ep = _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer)
        for layer in range(min(li, maxl), -1, -1):
            epoch += 1
            rows, scores = _search_layer(
                data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q,
                ef_construction, layer, visited, epoch,
            )
            order = np.lexsort((rows, -scores.astype(np.float64)))
            for j in order[: min(M, rows.size)]:
                nb = int(rows[j])
                _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, i, nb, layer)
                _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, nb, i, layer)
            ep = int(rows[order[0]])
        if li > maxl:
            entry, maxl = i, li
    return entry, maxl


def _link(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, a, b, layer):
    base, cap, ci = _slot(nbr_off, cnt_off, cap0, M, a, layer)
    c = cnts[ci]
    for t in range(c):
        if nbrs[base + t] == b:
            return
    if c < cap:
        nbrs[base + c] = b
        cnts[ci] = c + 1
        return
    # full: keep the cap best by similarity to a among current plus b
    s_new = float(np.dot(data[b], data[a]))
    worst_j = -1
    worst_s = np.inf
    for t in range(cap):
        s = float(np.dot(data[nbrs[base + t]], data[a]))
        if s < worst_s:
            worst_s = s
            worst_j = t
    if s_new > worst_s:
        nbrs[base + worst_j] = b


def hnsw_search(data, nbr_off, cnt_off, nbrs, cnts, M, entry, maxl, q, ef, visited):
    """Descend upper layers greedily, then beam-search layer 0 with width ef."""
    cap0 = 2 * M
    ep = entry
    for layer in range(maxl, 0, -1):
        ep = _greedy_layer(data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, layer)
    return _search_layer(
        data, nbr_off, cnt_off, nbrs, cnts, cap0, M, ep, q, ef, 0, visited, 1
    )


def forest_traverse(node_left, node_right, node_split, split_w, split_b,
                    leaf_start, leaf_count, leaf_items, roots, q, search_k,
                    n_rows, seen):
    """Priority-ordered descent across all trees until search_k candidates."""
    cand: list[int] = []
    heap: list[tuple[float, int]] = []  # max-heap on priority via negation
    for r in roots:
        heapq.heappush(heap, (-np.inf, int(r)))
    while heap and len(cand) < search_k:
        neg_p, node = heapq.heappop(heap)
        p = -neg_p
        si = int(node_split[node])
        if si < 0:
            start = int(leaf_start[node])
            for t in range(int(leaf_count[node])):
                row = int(leaf_items[start + t])
                if seen[row] == 0:
                    seen[row] = 1
                    cand.append(row)
        else:
            m = float(np.dot(split_w[si], q)) - float(split_b[si])
            heapq.heappush(heap, (-min(p, m), int(node_left[node])))
            heapq.heappush(heap, (-min(p, -m), int(node_right[node])))
    return np.asarray(cand, dtype=np.int32)
