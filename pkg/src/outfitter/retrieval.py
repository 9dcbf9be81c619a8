"""Similar-item retrieval, tiered result augmentation, and feedback search.

Result lists are composed in three tiers: the first half of the page keeps
the exact ranking, the next quarter is sampled from ranks 10-100, and the
remainder from ranks 500-1000, so repeated queries do not return a wall of
near-identical items. Bands clip on small catalogs; positions a clipped
band cannot fill fall back to the best unused ranks and are tagged
HEURISTIC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .catalog import Catalog, Category, items_by_category
from .combiner import CombinerParams, combine
from .errors import DimensionMismatchError, InsufficientCategoryError
from .index import VectorIndex

APPROX_BAND = (10, 100)
HEURISTIC_BAND = (500, 1000)


class Tier(Enum):
    ACCURATE = "accurate"
    APPROXIMATE = "approximate"
    HEURISTIC = "heuristic"


@dataclass
class TieredResults:
    entries: list[tuple[str, Tier]]
    n: int

    @property
    def ids(self) -> list[str]:
        return [e[0] for e in self.entries]


def tier_sizes(n: int) -> tuple[int, int, int]:
    """(accurate, approximate, heuristic) position counts for a page of n."""
    acc = math.ceil(n / 2)
    app = math.ceil(n / 4)
    return acc, app, n - acc - app


def augment_results(oracle_ranking: Sequence[str], n: int, seed: int) -> TieredResults:
    """Compose a tiered page from a full exact ranking (best first)."""
    if n < 4:
        raise ValueError(f"augmentation needs n >= 4, got {n}")
    total = len(oracle_ranking)
    if total == 0:
        raise ValueError("empty ranking")
    if total < n:
        raise InsufficientCategoryError(
            f"ranking of {total} cannot fill a page of {n}"
        )
    n_acc, n_app, n_heu = tier_sizes(n)
    rng = np.random.default_rng(seed)
    used = np.zeros(total, dtype=bool)  # by 0-based rank
    entries: list[tuple[str, Tier]] = []
    for r in range(n_acc):
        used[r] = True
        entries.append((oracle_ranking[r], Tier.ACCURATE))

    def band_sample(lo: int, hi: int, count: int, tier: Tier) -> int:
        """Sample `count` unused ranks from 1-based band [lo, hi]; returns shortfall."""
        pool = np.asarray(
            [r for r in range(lo - 1, min(hi, total)) if not used[r]], dtype=np.int64
        )
        take = min(count, pool.size)
        if take > 0:
            for r in rng.choice(pool, size=take, replace=False):
                used[r] = True
                entries.append((oracle_ranking[int(r)], tier))
        return count - take

    short = band_sample(*APPROX_BAND, n_app, Tier.APPROXIMATE)
    short += band_sample(*HEURISTIC_BAND, n_heu, Tier.HEURISTIC)
    if short:
        # next-best unused ranks, tagged HEURISTIC per the clipping rule
        for r in np.flatnonzero(~used)[:short]:
            used[r] = True
            entries.append((oracle_ranking[int(r)], Tier.HEURISTIC))
    return TieredResults(entries=entries, n=n)


def category_ranking(
    catalog: Catalog,
    index: VectorIndex,
    query_vec: np.ndarray,
    category: Category,
    n: int,
    exclude_id: str | None = None,
) -> list[str]:
    """Top-n ids of one category by cosine to the query, via over-fetch.

    Fetches 4n from the index, filters by category, and doubles the fetch
    until n survivors (or the whole store has been fetched).
    """
    count = catalog.store.count
    k = min(max(4 * n, 1), count)
    while True:
        hits = index.query(query_vec, k).hits
        survivors = [
            item_id
            for item_id, _ in hits
            if item_id != exclude_id and catalog.get(item_id).category is category
        ]
        if len(survivors) >= n or k == count:
            break
        k = min(2 * k, count)
    if len(survivors) < n:
        raise InsufficientCategoryError(
            f"category {category.label!r} holds only {len(survivors)} "
            f"other items, needed {n}"
        )
    return survivors[:n]


def similar_items(
    catalog: Catalog,
    index: VectorIndex,
    ref_item_id: str,
    n: int,
) -> list[str]:
    """Top-n same-category items by cosine to the reference, excluding it."""
    ref = catalog.get(ref_item_id)
    population = len(items_by_category(catalog, ref.category))
    if population <= n:
        raise InsufficientCategoryError(
            f"category {ref.category.label!r} has {population} items; "
            f"needs more than {n}"
        )
    return category_ranking(
        catalog, index, catalog.vector(ref_item_id), ref.category, n,
        exclude_id=ref_item_id,
    )


def full_ranking(
    catalog: Catalog,
    index: VectorIndex,
    query_vec: np.ndarray,
    depth: int,
    exclude_id: str | None = None,
) -> list[str]:
    """Top-`depth` ids over the whole catalog, excluding one id."""
    count = catalog.store.count
    k = min(depth + (1 if exclude_id is not None else 0), count)
    ids = [i for i, _ in index.query(query_vec, k).hits if i != exclude_id]
    return ids[:depth]


def feedback_search(
    catalog: Catalog,
    index: VectorIndex,
    ref_item_id: str,
    text_embedding: np.ndarray,
    n: int,
    combiner: CombinerParams,
    seed: int = 0,
) -> TieredResults:
    """Tiered page over the whole catalog for a fused (image, text) query."""
    ref = catalog.get(ref_item_id)
    text_embedding = np.asarray(text_embedding, dtype=np.float64).reshape(-1)
    if text_embedding.shape[0] != catalog.store.dim:
        raise DimensionMismatchError(
            f"text embedding dim {text_embedding.shape[0]} != "
            f"store dim {catalog.store.dim}"
        )
    query_vec = combine(combiner, catalog.vector(ref_item_id), text_embedding)
    depth = min(HEURISTIC_BAND[1], catalog.store.count - 1)
    ranking = full_ranking(catalog, index, query_vec, depth, exclude_id=ref.id)
    return augment_results(ranking, n, seed)
