"""Embedding-native fashion retrieval and outfit recommendation engine."""

from .catalog import (
    Catalog,
    Category,
    EmbeddingStore,
    Item,
    items_by_category,
    load_catalog,
)
from .index import (
    IndexConfig,
    IndexKind,
    SearchResult,
    VectorIndex,
    build_index,
    load_index,
    recall_against_oracle,
    save_index,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "Category",
    "EmbeddingStore",
    "Item",
    "items_by_category",
    "load_catalog",
    "IndexConfig",
    "IndexKind",
    "SearchResult",
    "VectorIndex",
    "build_index",
    "save_index",
    "load_index",
    "recall_against_oracle",
    "__version__",
]
