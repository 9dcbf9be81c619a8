"""Shared types and contracts for the four top-k cosine indexes."""
from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .. import kernels
from ..catalog import EmbeddingStore
from ..errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyStoreError,
    KOutOfRangeError,
    StoreMismatchError,
)


class IndexKind(Enum):
    FLAT = "flat"
    IVF = "ivf"
    HNSW = "hnsw"
    FOREST = "forest"


@dataclass(frozen=True)
class IndexConfig:
    kind: IndexKind = IndexKind.FLAT
    ivf_nlist: int = 256
    ivf_nprobe: int = 16
    hnsw_M: int = 16
    hnsw_ef_construction: int = 200
    hnsw_ef_search: int = 192
    forest_n_trees: int = 24
    forest_search_k: int = 8000
    forest_leaf_size: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.kind is IndexKind.IVF:
            if self.ivf_nlist < 1:
                raise ConfigError("ivf_nlist must be >= 1")
            if not 1 <= self.ivf_nprobe <= self.ivf_nlist:
                raise ConfigError("require 1 <= ivf_nprobe <= ivf_nlist")
        elif self.kind is IndexKind.HNSW:
            if self.hnsw_M < 2:
                raise ConfigError("hnsw_M must be >= 2")
            if self.hnsw_ef_construction < 1 or self.hnsw_ef_search < 1:
                raise ConfigError("hnsw ef parameters must be >= 1")
        elif self.kind is IndexKind.FOREST:
            if self.forest_n_trees < 1:
                raise ConfigError("forest_n_trees must be >= 1")
            if self.forest_leaf_size < 1:
                raise ConfigError("forest_leaf_size must be >= 1")
            if self.forest_search_k < 1:
                raise ConfigError("forest_search_k must be >= 1")

    def with_kind(self, kind: IndexKind) -> "IndexConfig":
        return replace(self, kind=kind)


@dataclass
class SearchResult:
    """Top-k hits sorted by score descending, ties by ascending item id."""

    hits: list[tuple[str, float]]
    elapsed_us: float = 0.0

    @property
    def ids(self) -> list[str]:
        return [h[0] for h in self.hits]


def select_topk(
    scores: np.ndarray,
    rows: np.ndarray | None,
    ids: Sequence[str],
    k: int,
) -> list[tuple[str, float]]:
    """Exact top-k over candidate scores with (score desc, id asc) order.

    ``rows`` maps score positions to store rows; None means scores cover the
    whole store in row order. Uses a partition threshold so only ~k entries
    plus score ties reach the python comparison sort.
    """
    m = scores.shape[0]
    kk = min(k, m)
    if kk == 0:
        return []
    if kk < m:
        thr = np.partition(scores, m - kk)[m - kk]
        cand = np.flatnonzero(scores >= thr)
    else:
        cand = np.arange(m)
    if rows is None:
        pairs = [(ids[int(c)], float(scores[c])) for c in cand]
    else:
        pairs = [(ids[int(rows[c])], float(scores[c])) for c in cand]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs[:kk]


class VectorIndex(ABC):
    """Immutable top-k cosine index over one embedding store."""

    kind: IndexKind

    def __init__(self, store: EmbeddingStore, cfg: IndexConfig):
        self.store = store
        self.cfg = cfg
        self._backend: str | None = None  # None -> process default

    @property
    def kernels(self):
        return kernels.backend(self._backend)

    def use_backend(self, name: str | None) -> "VectorIndex":
        """Pin this index to one kernel backend (benchmark use)."""
        if name is not None:
            kernels.backend(name)  # raises if unavailable
        self._backend = name
        return self

    def _check_query(self, q: np.ndarray, k: int) -> np.ndarray:
        q = np.asarray(q, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.store.dim:
            raise DimensionMismatchError(
                f"query dim {q.shape[0]} != store dim {self.store.dim}"
            )
        if not 1 <= k <= self.store.count:
            raise KOutOfRangeError(f"k={k} outside [1, {self.store.count}]")
        norm = float(np.linalg.norm(q.astype(np.float64)))
        if norm < 1e-12:
            raise DimensionMismatchError("query vector has zero norm")
        return (q.astype(np.float64) / norm).astype(np.float32)

    def query(self, q: np.ndarray, k: int) -> SearchResult:
        qn = self._check_query(q, k)
        t0 = time.perf_counter_ns()
        hits = self._query_normalized(qn, k)
        elapsed = (time.perf_counter_ns() - t0) / 1000.0
        return SearchResult(hits=hits, elapsed_us=elapsed)

    @abstractmethod
    def _query_normalized(self, q: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Top-k hits for an already unit-normalized float32 query."""

    @abstractmethod
    def memory_footprint(self) -> int:
        """Deterministic byte accounting of vectors plus index structure."""

    def _base_footprint(self) -> int:
        return self.store.data.nbytes + self.store.id_table_bytes()


def check_buildable(store: EmbeddingStore, cfg: IndexConfig) -> None:
    if store.count == 0:
        raise EmptyStoreError("cannot build an index over an empty store")
    cfg.validate()


def recall_against_oracle(
    index: VectorIndex,
    oracle: VectorIndex,
    queries: np.ndarray,
    k: int,
) -> float:
    """Mean over queries of |approx-top-k intersect exact-top-k| / k."""
    if oracle.kind is not IndexKind.FLAT:
        raise ConfigError("oracle must be a FLAT index")
    if index.store is not oracle.store and (
        index.store.content_hash() != oracle.store.content_hash()
    ):
        raise StoreMismatchError("index and oracle were built over different stores")
    queries = np.asarray(queries, dtype=np.float32)
    total = 0.0
    for q in queries:
        exact = set(oracle.query(q, k).ids)
        approx = set(index.query(q, k).ids)
        total += len(exact & approx) / k
    return total / len(queries)
