"""Exhaustive scan index: the exact-search oracle for the approximate kinds."""
from __future__ import annotations

import numpy as np

from ..catalog import EmbeddingStore
from .base import IndexConfig, IndexKind, VectorIndex, check_buildable, select_topk


class FlatIndex(VectorIndex):
    kind = IndexKind.FLAT

    def __init__(self, store: EmbeddingStore, cfg: IndexConfig):
        super().__init__(store, cfg)

    @classmethod
    def build(cls, store: EmbeddingStore, cfg: IndexConfig) -> "FlatIndex":
        check_buildable(store, cfg)
        return cls(store, cfg)

    def _query_normalized(self, q: np.ndarray, k: int) -> list[tuple[str, float]]:
        scores = self.store.data @ q
        return select_topk(scores, None, self.store.ids, k)

    def memory_footprint(self) -> int:
        return self._base_footprint()
