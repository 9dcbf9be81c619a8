"""Inverted-file index: k-means coarse partitions, probe a subset per query."""
from __future__ import annotations

import numpy as np

from ..catalog import EmbeddingStore
from .base import IndexConfig, IndexKind, VectorIndex, check_buildable, select_topk

KMEANS_ITERS = 25
_ASSIGN_CHUNK = 1 << 16


def _assign(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per row by Euclidean distance: argmin(||c||^2/2 - x.c)."""
    half_sq = 0.5 * np.einsum("ij,ij->i", centroids, centroids)
    n = data.shape[0]
    out = np.empty(n, dtype=np.int64)
    for s in range(0, n, _ASSIGN_CHUNK):
        e = min(s + _ASSIGN_CHUNK, n)
        d = data[s:e] @ centroids.T
        np.subtract(half_sq[None, :], d, out=d)
        out[s:e] = np.argmin(d, axis=1)
    return out


def _kmeans(data: np.ndarray, nlist: int, seed: int) -> np.ndarray:
    """Lloyd's iterations with seeded row-sample init and a fixed cap.

    Empty clusters are re-seeded from the largest cluster's farthest member.
    """
    n, dim = data.shape
    rng = np.random.default_rng(seed)
    nlist = min(nlist, n)
    centroids = data[rng.choice(n, size=nlist, replace=False)].astype(np.float32)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(KMEANS_ITERS):
        new_assign = _assign(data, centroids)
        counts = np.bincount(new_assign, minlength=nlist)
        sums = np.empty((nlist, dim), dtype=np.float64)
        for j in range(dim):
            sums[:, j] = np.bincount(new_assign, weights=data[:, j], minlength=nlist)
        nonzero = counts > 0
        centroids[nonzero] = (sums[nonzero] / counts[nonzero, None]).astype(np.float32)
        for empty in np.flatnonzero(~nonzero):
            largest = int(np.argmax(counts))
            members = np.flatnonzero(new_assign == largest)
            d = np.linalg.norm(
                data[members].astype(np.float64)
                - centroids[largest].astype(np.float64),
                axis=1,
            )
            farthest = members[int(np.argmax(d))]
            centroids[empty] = data[farthest]
            counts[largest] -= 1
            counts[empty] += 1
            new_assign[farthest] = empty
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centroids


class IvfIndex(VectorIndex):
    kind = IndexKind.IVF

    def __init__(
        self,
        store: EmbeddingStore,
        cfg: IndexConfig,
        centroids: np.ndarray,
        list_offsets: np.ndarray,
        list_rows: np.ndarray,
    ):
        super().__init__(store, cfg)
        self.centroids = centroids
        self.list_offsets = list_offsets
        self.list_rows = list_rows
        self._half_sq = 0.5 * np.einsum("ij,ij->i", centroids, centroids)

    @classmethod
    def build(cls, store: EmbeddingStore, cfg: IndexConfig) -> "IvfIndex":
        check_buildable(store, cfg)
        nlist = min(cfg.ivf_nlist, store.count)
        centroids = _kmeans(store.data, nlist, cfg.seed)
        assign = _assign(store.data, centroids)
        order = np.argsort(assign, kind="stable")
        list_rows = order.astype(np.int32)
        counts = np.bincount(assign, minlength=nlist)
        list_offsets = np.zeros(nlist + 1, dtype=np.int64)
        np.cumsum(counts, out=list_offsets[1:])
        return cls(store, cfg, centroids, list_offsets, list_rows)

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    def _query_normalized(self, q: np.ndarray, k: int) -> list[tuple[str, float]]:
        nprobe = min(self.cfg.ivf_nprobe, self.nlist)
        keys = self._half_sq - self.centroids @ q
        probe = np.lexsort((np.arange(self.nlist), keys))[:nprobe]
        pieces = [
            self.list_rows[self.list_offsets[p] : self.list_offsets[p + 1]]
            for p in probe
        ]
        cand = np.concatenate(pieces) if pieces else np.empty(0, dtype=np.int32)
        if cand.size == 0:
            return []
        scores = self.kernels.score_rows(self.store.data, cand, q)
        return select_topk(scores, cand, self.store.ids, k)

    def memory_footprint(self) -> int:
        return (
            self._base_footprint()
            + self.centroids.nbytes
            + self.list_offsets.nbytes
            + self.list_rows.nbytes
        )
