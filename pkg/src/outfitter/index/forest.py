"""Random-projection tree forest (ANNOY-style).

Each split hyperplane is the perpendicular bisector of two distinct randomly
chosen points of the node's subset. Queries descend all trees through one
shared priority queue ordered by boundary margin, pool the visited leaves,
deduplicate, and re-rank the candidates exactly.
"""
from __future__ import annotations

import numpy as np

from ..catalog import EmbeddingStore
from ..errors import ConfigError
from .base import IndexConfig, IndexKind, VectorIndex, check_buildable, select_topk

_SPLIT_RETRIES = 16


class _ForestBuilder:
    def __init__(self, data: np.ndarray, leaf_size: int, rng: np.random.Generator):
        self.data = data
        self.leaf_size = leaf_size
        self.rng = rng
        self.left: list[int] = []
        self.right: list[int] = []
        self.split_idx: list[int] = []
        self.leaf_start: list[int] = []
        self.leaf_count: list[int] = []
        self.split_w: list[np.ndarray] = []
        self.split_b: list[float] = []
        self.leaf_items: list[int] = []

    def _new_node(self) -> int:
        self.left.append(-1)
        self.right.append(-1)
        self.split_idx.append(-1)
        self.leaf_start.append(-1)
        self.leaf_count.append(0)
        return len(self.left) - 1

    def _make_leaf(self, node: int, subset: np.ndarray) -> None:
        self.leaf_start[node] = len(self.leaf_items)
        self.leaf_count[node] = int(subset.size)
        self.leaf_items.extend(int(r) for r in np.sort(subset))

    def _pick_pair(self, subset: np.ndarray) -> tuple[int, int] | None:
        for _ in range(_SPLIT_RETRIES):
            a, b = self.rng.choice(subset.size, size=2, replace=False)
            ra, rb = int(subset[a]), int(subset[b])
            if not np.array_equal(self.data[ra], self.data[rb]):
                return ra, rb
        return None

    def build_tree(self, subset: np.ndarray) -> int:
        node = self._new_node()
        stack = [(node, subset)]
        while stack:
            nd, rows = stack.pop()
            if rows.size <= self.leaf_size:
                self._make_leaf(nd, rows)
                continue
            pair = self._pick_pair(rows)
            if pair is None:
                self._make_leaf(nd, rows)
                continue
            ra, rb = pair
            w = (self.data[ra] - self.data[rb]).astype(np.float32)
            bias = np.float32(w @ ((self.data[ra] + self.data[rb]) * 0.5))
            margins = self.data[rows] @ w - bias
            mask = margins >= 0
            left_rows = rows[mask]
            right_rows = rows[~mask]
            if left_rows.size == 0 or right_rows.size == 0:
                self._make_leaf(nd, rows)
                continue
            si = len(self.split_w)
            self.split_w.append(w)
            self.split_b.append(float(bias))
            ln = self._new_node()
            rn = self._new_node()
            self.split_idx[nd] = si
            self.left[nd] = ln
            self.right[nd] = rn
            stack.append((rn, right_rows))
            stack.append((ln, left_rows))
        return node


class ForestIndex(VectorIndex):
    kind = IndexKind.FOREST

    def __init__(
        self,
        store: EmbeddingStore,
        cfg: IndexConfig,
        node_left: np.ndarray,
        node_right: np.ndarray,
        node_split: np.ndarray,
        split_w: np.ndarray,
        split_b: np.ndarray,
        leaf_start: np.ndarray,
        leaf_count: np.ndarray,
        leaf_items: np.ndarray,
        roots: np.ndarray,
    ):
        super().__init__(store, cfg)
        self.node_left = node_left
        self.node_right = node_right
        self.node_split = node_split
        self.split_w = split_w
        self.split_b = split_b
        self.leaf_start = leaf_start
        self.leaf_count = leaf_count
        self.leaf_items = leaf_items
        self.roots = roots

    @classmethod
    def build(cls, store: EmbeddingStore, cfg: IndexConfig) -> "ForestIndex":
        check_buildable(store, cfg)
        rng = np.random.default_rng(cfg.seed)
        builder = _ForestBuilder(store.data, cfg.forest_leaf_size, rng)
        all_rows = np.arange(store.count, dtype=np.int64)
        roots = np.asarray(
            [builder.build_tree(all_rows) for _ in range(cfg.forest_n_trees)],
            dtype=np.int32,
        )
        dim = store.dim
        split_w = (
            np.stack(builder.split_w)
            if builder.split_w
            else np.empty((0, dim), dtype=np.float32)
        )
        return cls(
            store,
            cfg,
            np.asarray(builder.left, dtype=np.int32),
            np.asarray(builder.right, dtype=np.int32),
            np.asarray(builder.split_idx, dtype=np.int32),
            np.ascontiguousarray(split_w, dtype=np.float32),
            np.asarray(builder.split_b, dtype=np.float32),
            np.asarray(builder.leaf_start, dtype=np.int64),
            np.asarray(builder.leaf_count, dtype=np.int32),
            np.asarray(builder.leaf_items, dtype=np.int32),
            roots,
        )

    def _query_normalized(self, q: np.ndarray, k: int) -> list[tuple[str, float]]:
        search_k = self.cfg.forest_search_k
        if search_k < k:
            raise ConfigError(f"forest_search_k={search_k} must be >= k={k}")
        seen = np.zeros(self.store.count, dtype=np.uint8)
        cand = self.kernels.forest_traverse(
            self.node_left, self.node_right, self.node_split,
            self.split_w, self.split_b,
            self.leaf_start, self.leaf_count, self.leaf_items,
            self.roots, q, search_k, self.store.count, seen,
        )
        if cand.size == 0:
            return []
        scores = self.kernels.score_rows(self.store.data, cand, q)
        return select_topk(scores, cand, self.store.ids, k)

    def memory_footprint(self) -> int:
        return (
            self._base_footprint()
            + self.node_left.nbytes
            + self.node_right.nbytes
            + self.node_split.nbytes
            + self.split_w.nbytes
            + self.split_b.nbytes
            + self.leaf_start.nbytes
            + self.leaf_count.nbytes
            + self.leaf_items.nbytes
            + self.roots.nbytes
        )
