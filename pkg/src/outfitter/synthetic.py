"""Seeded synthetic data generators for tests, benchmarks, and demos.

Two vector populations are used throughout:

* isotropic unit Gaussians, for timing and scaling benchmarks where the
  distribution should carry no structure an index could exploit;
* mixtures of cluster directions plus noise, mirroring the geometry of real
  catalog embeddings, for recall measurements and the outfit training task.

The style-cluster task centers its cluster directions (so they sum to ~0)
and includes partial outfits. Both are required for the summed-cosine
contrastive objective to be learnable at desk scale: with a handful of items
per category the negative-sum term otherwise rewards a constant prediction
anti-aligned with the category mean, and all-complete outfits would leave
the absent-category token untrained.
"""
from __future__ import annotations

import numpy as np

from .catalog import Catalog, Category, EmbeddingStore, Item

DEFAULT_DIM = 32


def unit_gaussian(count: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(count, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x.astype(np.float32)


def gaussian_store(count: int, dim: int, seed: int) -> EmbeddingStore:
    """Unit-normalized isotropic Gaussian vectors with zero-padded ids."""
    return EmbeddingStore(
        [f"v{i:07d}" for i in range(count)],
        unit_gaussian(count, dim, seed),
        normalize=False,
    )


def cluster_directions(n_clusters: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    dirs = rng.normal(size=(n_clusters, dim))
    dirs -= dirs.mean(axis=0, keepdims=True)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs


def clustered_vectors(
    count: int,
    dim: int,
    n_clusters: int,
    noise: float,
    seed: int,
    dirs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectors drawn as cluster direction + noise; returns (vectors, assignment)."""
    rng = np.random.default_rng(seed)
    if dirs is None:
        dirs = cluster_directions(n_clusters, dim, rng)
    assign = rng.integers(0, dirs.shape[0], size=count)
    x = dirs[assign] + noise * rng.normal(size=(count, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x.astype(np.float32), assign


def clustered_store(
    count: int, dim: int, n_clusters: int, noise: float, seed: int
) -> tuple[EmbeddingStore, np.ndarray, np.ndarray]:
    """Clustered store plus its directions, for recall measurements."""
    rng = np.random.default_rng(seed)
    dirs = cluster_directions(n_clusters, dim, rng)
    x, assign = clustered_vectors(count, dim, n_clusters, noise, seed + 1, dirs=dirs)
    store = EmbeddingStore(
        [f"v{i:07d}" for i in range(count)], x, normalize=False
    )
    return store, dirs, assign


def style_cluster_task(
    n_clusters: int = 20,
    dim: int = DEFAULT_DIM,
    noise: float = 0.12,
    seed: int = 11,
    extra_subsets: int = 4,
) -> tuple[Catalog, list[list[Item]], np.ndarray]:
    """Catalog of one item per (cluster, category) plus a mixed outfit list.

    Each cluster contributes its full ten-item outfit and `extra_subsets`
    random partial outfits (sizes 2-9), so training sees absent categories.
    """
    rng = np.random.default_rng(seed)
    dirs = cluster_directions(n_clusters, dim, rng)
    records: list[tuple[str, Category, str]] = []
    vecs: list[np.ndarray] = []
    for c in range(n_clusters):
        for cat in Category:
            iid = f"c{c:03d}-{cat.label}"
            records.append((iid, cat, f"assets/{iid}.png"))
            vecs.append(dirs[c] + noise * rng.normal(size=dim))
    catalog = Catalog.from_arrays(records, np.asarray(vecs, dtype=np.float32))
    outfits: list[list[Item]] = []
    for c in range(n_clusters):
        full = [catalog.get(f"c{c:03d}-{cat.label}") for cat in Category]
        outfits.append(full)
        for _ in range(extra_subsets):
            size = int(rng.integers(2, 10))
            sel = rng.choice(len(full), size=size, replace=False)
            outfits.append([full[int(j)] for j in sorted(sel)])
    return catalog, outfits, dirs


def holdout_references(
    dirs: np.ndarray,
    noise: float,
    per_cluster: int,
    seed: int,
) -> list[tuple[int, Category, np.ndarray]]:
    """Fresh reference vectors per cluster that are not in any catalog."""
    rng = np.random.default_rng(seed)
    out = []
    n_clusters, dim = dirs.shape
    for c in range(n_clusters):
        for _ in range(per_cluster):
            cat = Category(int(rng.integers(0, 10)))
            vec = dirs[c] + noise * rng.normal(size=dim)
            out.append((c, cat, (vec / np.linalg.norm(vec)).astype(np.float32)))
    return out


def combiner_triples(
    count: int, dim: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Triples where the target is the normalized sum of the unit inputs."""
    rng = np.random.default_rng(seed)
    triples = []
    for _ in range(count):
        ref = rng.normal(size=dim)
        ref /= np.linalg.norm(ref)
        txt = rng.normal(size=dim)
        txt /= np.linalg.norm(txt)
        tgt = ref + txt
        tgt /= np.linalg.norm(tgt)
        triples.append((ref, txt, tgt))
    return triples
