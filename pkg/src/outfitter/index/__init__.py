"""Four interchangeable top-k cosine indexes with persistence and recall tools."""
from __future__ import annotations

from ..catalog import EmbeddingStore
from .base import (
    IndexConfig,
    IndexKind,
    SearchResult,
    VectorIndex,
    recall_against_oracle,
    select_topk,
)
from .flat import FlatIndex
from .forest import ForestIndex
from .hnsw import HnswIndex
from .io import load_index, save_index
from .ivf import IvfIndex

_BUILDERS = {
    IndexKind.FLAT: FlatIndex.build,
    IndexKind.IVF: IvfIndex.build,
    IndexKind.HNSW: HnswIndex.build,
    IndexKind.FOREST: ForestIndex.build,
}


def build_index(store: EmbeddingStore, cfg: IndexConfig) -> VectorIndex:
    """Build the index kind named by cfg over the store's rows."""
    return _BUILDERS[cfg.kind](store, cfg)


__all__ = [
    "IndexConfig",
    "IndexKind",
    "SearchResult",
    "VectorIndex",
    "FlatIndex",
    "IvfIndex",
    "HnswIndex",
    "ForestIndex",
    "build_index",
    "save_index",
    "load_index",
    "recall_against_oracle",
    "select_topk",
]
