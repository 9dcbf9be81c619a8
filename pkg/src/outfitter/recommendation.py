"""Turns predicted complementary embeddings into presented outfits.

Two presentation settings: TONE_SUR_TONE returns the single nearest item per
target category (stable, matching looks); MIX_AND_MATCH samples uniformly
from each category's top-1000 candidate pool (clipped to the category size)
for variety.
"""
from __future__ import annotations

from enum import Enum
from typing import Iterable

import numpy as np

from .catalog import Catalog, Category, items_by_category
from .errors import EmptyCategoryError
from .index import VectorIndex
from .retrieval import category_ranking
from .transformer import TransformerParams, recommend_embeddings

MIX_POOL_DEPTH = 1000


class RecommendSetting(Enum):
    TONE_SUR_TONE = "tone_sur_tone"
    MIX_AND_MATCH = "mix_and_match"


def candidate_pool(
    catalog: Catalog,
    index: VectorIndex,
    predicted: np.ndarray,
    category: Category,
    depth: int = MIX_POOL_DEPTH,
) -> list[str]:
    """Nearest `depth` items of one category to a predicted embedding."""
    population = len(items_by_category(catalog, category))
    if population == 0:
        raise EmptyCategoryError(f"category {category.label!r} holds no items")
    return category_ranking(
        catalog, index, predicted, category, min(depth, population)
    )


def _pick_outfit(
    catalog: Catalog,
    index: VectorIndex,
    predictions: dict[Category, np.ndarray],
    setting: RecommendSetting,
    seed: int,
) -> dict[Category, str]:
    rng = np.random.default_rng(seed)
    outfit: dict[Category, str] = {}
    for category in sorted(predictions, key=lambda c: c.value):
        if setting is RecommendSetting.TONE_SUR_TONE:
            pool = candidate_pool(catalog, index, predictions[category], category,
                                  depth=1)
            outfit[category] = pool[0]
        else:
            pool = candidate_pool(catalog, index, predictions[category], category)
            outfit[category] = pool[int(rng.integers(0, len(pool)))]
    return outfit


def recommend_outfit(
    catalog: Catalog,
    index: VectorIndex,
    transformer: TransformerParams,
    ref_item_id: str,
    targets: Iterable[Category],
    setting: RecommendSetting,
    seed: int = 0,
) -> dict[Category, str]:
    """One complementary item per target category for the reference item."""
    ref = catalog.get(ref_item_id)
    predictions = recommend_embeddings(transformer, catalog.store, ref, targets)
    return _pick_outfit(catalog, index, predictions, setting, seed)


def recommend_with_alternates(
    catalog: Catalog,
    index: VectorIndex,
    transformer: TransformerParams,
    ref_item_id: str,
    targets: Iterable[Category],
    setting: RecommendSetting,
    seed: int = 0,
    alternates: int = 8,
) -> tuple[dict[Category, str], dict[Category, list[str]]]:
    """Outfit picks plus the top-`alternates` browsable items per category."""
    ref = catalog.get(ref_item_id)
    predictions = recommend_embeddings(transformer, catalog.store, ref, targets)
    outfit = _pick_outfit(catalog, index, predictions, setting, seed)
    alts = {
        category: candidate_pool(
            catalog, index, predictions[category], category,
            depth=min(alternates, len(items_by_category(catalog, category))),
        )
        for category in sorted(predictions, key=lambda c: c.value)
    }
    return outfit, alts
