"""Hierarchical navigable small-world graph index.

Adjacency lives in one flat int32 pool: node ``i`` owns a block of
``2M + levels[i] * M`` slots starting at ``nbr_offsets[i]`` (layer 0 holds up
to 2M neighbors, upper layers up to M each). Per-layer fill counts live in a
parallel ``counts`` pool. The layout is shared verbatim with both kernel
backends and with the on-disk format.
"""
from __future__ import annotations

import math

import numpy as np

from ..catalog import EmbeddingStore
from ..errors import ConfigError
from .base import IndexConfig, IndexKind, VectorIndex, check_buildable, select_topk

MAX_LEVEL = 60


def draw_levels(n: int, M: int, seed: int) -> np.ndarray:
    """Geometric layer assignment with ml = 1/ln(M)."""
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    ml = 1.0 / math.log(M)
    levels = np.floor(-np.log(np.maximum(u, 1e-300)) * ml).astype(np.int32)
    return np.minimum(levels, MAX_LEVEL)


def _pool_layout(levels: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray, int, int]:
    n = levels.shape[0]
    block = 2 * M + levels.astype(np.int64) * M
    nbr_off = np.zeros(n, dtype=np.int64)
    np.cumsum(block[:-1], out=nbr_off[1:])
    cnt_block = levels.astype(np.int64) + 1
    cnt_off = np.zeros(n, dtype=np.int64)
    np.cumsum(cnt_block[:-1], out=cnt_off[1:])
    return nbr_off, cnt_off, int(block.sum()), int(cnt_block.sum())


class HnswIndex(VectorIndex):
    kind = IndexKind.HNSW

    def __init__(
        self,
        store: EmbeddingStore,
        cfg: IndexConfig,
        levels: np.ndarray,
        nbr_off: np.ndarray,
        cnt_off: np.ndarray,
        nbrs: np.ndarray,
        cnts: np.ndarray,
        entry: int,
        max_level: int,
    ):
        super().__init__(store, cfg)
        self.levels = levels
        self.nbr_off = nbr_off
        self.cnt_off = cnt_off
        self.nbrs = nbrs
        self.cnts = cnts
        self.entry = entry
        self.max_level = max_level

    @classmethod
    def build(cls, store: EmbeddingStore, cfg: IndexConfig, backend: str | None = None) -> "HnswIndex":
        check_buildable(store, cfg)
        n = store.count
        M = cfg.hnsw_M
        levels = draw_levels(n, M, cfg.seed)
        nbr_off, cnt_off, pool_size, cnt_size = _pool_layout(levels, M)
        nbrs = np.zeros(pool_size, dtype=np.int32)
        cnts = np.zeros(cnt_size, dtype=np.int32)
        from .. import kernels

        kern = kernels.backend(backend)
        entry, max_level = kern.hnsw_build(
            store.data, levels, nbr_off, cnt_off, nbrs, cnts,
            M, cfg.hnsw_ef_construction,
        )
        idx = cls(store, cfg, levels, nbr_off, cnt_off, nbrs, cnts,
                  int(entry), int(max_level))
        idx._backend = backend
        return idx

    def _query_normalized(self, q: np.ndarray, k: int) -> list[tuple[str, float]]:
        ef = self.cfg.hnsw_ef_search
        if ef < k:
            raise ConfigError(f"hnsw_ef_search={ef} must be >= k={k}")
        visited = np.zeros(self.store.count, dtype=np.int64)
        rows, scores = self.kernels.hnsw_search(
            self.store.data, self.nbr_off, self.cnt_off, self.nbrs, self.cnts,
            self.cfg.hnsw_M, self.entry, self.max_level, q, ef, visited,
        )
        return select_topk(scores, rows, self.store.ids, k)

    def memory_footprint(self) -> int:
        return (
            self._base_footprint()
            + self.levels.nbytes
            + self.nbr_off.nbytes
            + self.cnt_off.nbytes
            + self.nbrs.nbytes
            + self.cnts.nbytes
        )
