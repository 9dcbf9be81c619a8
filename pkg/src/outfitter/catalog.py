"""Item catalog and embedding store: loading, validation, id/category bookkeeping.

The embedding file format is binary and bit-exact (little-endian):

    magic "KKEM" | u32 version=1 | u32 count | u32 dim
    then `count` records of: u32 id-length | id bytes (UTF-8) | dim * f32

The catalog file is UTF-8 JSON lines, one object per line with keys
``id``, ``category``, ``image_ref``.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    IdSetMismatchError,
    MalformedRecordError,
    UnknownCategoryError,
    UnknownItemError,
)

EMBEDDING_MAGIC = b"KKEM"
EMBEDDING_VERSION = 1
DEFAULT_DIM = 640

# Fixed, ordered label set. The position of a category doubles as its
# slot in the outfit sequence model, so the order must never change.
CATEGORY_NAMES = (
    "bags",
    "tops",
    "outerwear",
    "hats",
    "bottoms",
    "scarves",
    "jewelry",
    "accessories",
    "shoes",
    "sunglasses",
)


class Category(IntEnum):
    BAGS = 0
    TOPS = 1
    OUTERWEAR = 2
    HATS = 3
    BOTTOMS = 4
    SCARVES = 5
    JEWELRY = 6
    ACCESSORIES = 7
    SHOES = 8
    SUNGLASSES = 9

    @property
    def label(self) -> str:
        return CATEGORY_NAMES[self.value]

    @classmethod
    def from_name(cls, name: str) -> "Category":
        try:
            return cls(CATEGORY_NAMES.index(name))
        except ValueError:
            raise UnknownCategoryError(f"unknown category {name!r}") from None


NUM_CATEGORIES = len(CATEGORY_NAMES)


@dataclass(frozen=True)
class Item:
    id: str
    category: Category
    image_ref: str
    embedding_row: int


class EmbeddingStore:
    """Dense matrix of unit-normalized float32 vectors with id<->row mapping."""

    def __init__(self, ids: Sequence[str], data: np.ndarray, normalize: bool = True):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise DimensionMismatchError("embedding data must be a 2-d matrix")
        if len(ids) != data.shape[0]:
            raise IdSetMismatchError(
                f"{len(ids)} ids for {data.shape[0]} embedding rows"
            )
        if data.shape[0] > 0 and data.shape[1] == 0:
            raise DimensionMismatchError("embedding dim must be positive")
        if normalize and data.shape[0] > 0:
            norms = np.linalg.norm(data.astype(np.float64), axis=1)
            zero = np.flatnonzero(norms < 1e-12)
            if zero.size:
                raise MalformedRecordError(
                    f"zero embedding vector for id {ids[int(zero[0])]!r}"
                )
            data = (data.astype(np.float64) / norms[:, None]).astype(np.float32)
        self.ids: list[str] = list(ids)
        self.data = np.ascontiguousarray(data, dtype=np.float32)
        self._row_of = {item_id: row for row, item_id in enumerate(self.ids)}
        if len(self._row_of) != len(self.ids):
            seen: set[str] = set()
            for item_id in self.ids:
                if item_id in seen:
                    raise DuplicateIdError(f"duplicate embedding id {item_id!r}")
                seen.add(item_id)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def row_of(self, item_id: str) -> int:
        try:
            return self._row_of[item_id]
        except KeyError:
            raise UnknownItemError(f"unknown item id {item_id!r}") from None

    def vector(self, item_id: str) -> np.ndarray:
        return self.data[self.row_of(item_id)]

    def id_table_bytes(self) -> int:
        """Bytes needed to store the id table (length-prefixed UTF-8)."""
        return sum(4 + len(i.encode("utf-8")) for i in self.ids)

    def content_hash(self) -> bytes:
        """SHA-256 over dims, ids, and raw vector bytes; binds indexes to stores."""
        h = hashlib.sha256()
        h.update(struct.pack("<II", self.count, self.dim))
        for item_id in self.ids:
            raw = item_id.encode("utf-8")
            h.update(struct.pack("<I", len(raw)))
            h.update(raw)
        h.update(self.data.tobytes())
        return h.digest()


def write_embeddings(path: str | Path, ids: Sequence[str], data: np.ndarray) -> None:
    """Write vectors in the binary embedding format (no normalization applied)."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2 or data.shape[0] != len(ids):
        raise DimensionMismatchError("ids and data rows must align")
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<III", EMBEDDING_VERSION, data.shape[0], data.shape[1]))
        for item_id, row in zip(ids, data):
            raw = item_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(row.tobytes())


def read_embeddings(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read an embedding file, returning ids and the raw (unnormalized) matrix."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != EMBEDDING_MAGIC:
        raise MalformedRecordError(f"{path}: not an embedding file (bad magic)")
    version, count, dim = struct.unpack_from("<III", blob, 4)
    if version != EMBEDDING_VERSION:
        raise MalformedRecordError(f"{path}: unsupported embedding version {version}")
    if dim == 0:
        raise DimensionMismatchError(f"{path}: header dim must be positive")
    ids: list[str] = []
    data = np.empty((count, dim), dtype=np.float32)
    off = 16
    for i in range(count):
        if off + 4 > len(blob):
            raise MalformedRecordError(f"{path}: record {i} truncated at id length")
        (id_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + id_len > len(blob):
            raise MalformedRecordError(f"{path}: record {i} truncated inside id")
        item_id = blob[off : off + id_len].decode("utf-8")
        off += id_len
        vec_bytes = dim * 4
        if off + vec_bytes > len(blob):
            raise DimensionMismatchError(
                f"{path}: record for {item_id!r} holds fewer than {dim} values"
            )
        data[i] = np.frombuffer(blob, dtype="<f4", count=dim, offset=off)
        off += vec_bytes
        ids.append(item_id)
    if off != len(blob):
        raise MalformedRecordError(f"{path}: {len(blob) - off} trailing bytes")
    return ids, data


class Catalog:
    """Immutable view over items plus their embedding store."""

    def __init__(self, items: Sequence[Item], store: EmbeddingStore):
        self.items: list[Item] = list(items)
        self.store = store
        self._by_id: dict[str, Item] = {}
        self._by_category: dict[Category, list[Item]] = {c: [] for c in Category}
        for item in self.items:
            if item.id in self._by_id:
                raise DuplicateIdError(f"duplicate item id {item.id!r}")
            self._by_id[item.id] = item
            self._by_category[item.category].append(item)

    def __len__(self) -> int:
        return len(self.items)

    def get(self, item_id: str) -> Item:
        try:
            return self._by_id[item_id]
        except KeyError:
            raise UnknownItemError(f"unknown item id {item_id!r}") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._by_id

    def vector(self, item_id: str) -> np.ndarray:
        return self.store.data[self.get(item_id).embedding_row]

    @classmethod
    def from_arrays(
        cls,
        records: Iterable[tuple[str, Category | str, str]],
        vectors: np.ndarray,
        normalize: bool = True,
    ) -> "Catalog":
        """Build a catalog in memory; record order defines item order and rows."""
        recs = list(records)
        ids = [r[0] for r in recs]
        store = EmbeddingStore(ids, vectors, normalize=normalize)
        items = []
        for row, (item_id, category, image_ref) in enumerate(recs):
            if isinstance(category, str):
                category = Category.from_name(category)
            items.append(Item(item_id, category, image_ref, row))
        return cls(items, store)


def items_by_category(catalog: Catalog, category: Category) -> list[Item]:
    """All items of one category in file order; empty when none exist."""
    return list(catalog._by_category[category])


def _parse_catalog_line(line: str, lineno: int) -> tuple[str, Category, str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"catalog line {lineno}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedRecordError(f"catalog line {lineno}: expected an object")
    missing = {"id", "category", "image_ref"} - obj.keys()
    if missing:
        raise MalformedRecordError(
            f"catalog line {lineno}: missing keys {sorted(missing)}"
        )
    item_id = obj["id"]
    if not isinstance(item_id, str) or not item_id:
        raise MalformedRecordError(f"catalog line {lineno}: id must be a non-empty string")
    try:
        category = Category.from_name(obj["category"])
    except UnknownCategoryError:
        raise UnknownCategoryError(
            f"item {item_id!r}: unknown category {obj['category']!r}"
        ) from None
    return item_id, category, str(obj["image_ref"])


def load_catalog(catalog_path: str | Path, embeddings_path: str | Path) -> Catalog:
    """Load and cross-validate the catalog and its embedding file.

    Items iterate in catalog file order; embedding rows keep embedding file
    order; every row is re-normalized to unit length.
    """
    records: list[tuple[str, Category, str]] = []
    seen: set[str] = set()
    with open(catalog_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            item_id, category, image_ref = _parse_catalog_line(line, lineno)
            if item_id in seen:
                raise DuplicateIdError(f"duplicate item id {item_id!r} in catalog")
            seen.add(item_id)
            records.append((item_id, category, image_ref))

    emb_ids, emb_data = read_embeddings(embeddings_path)
    emb_seen: set[str] = set()
    for item_id in emb_ids:
        if item_id in emb_seen:
            raise DuplicateIdError(f"duplicate item id {item_id!r} in embeddings")
        emb_seen.add(item_id)

    if seen != emb_seen:
        only_cat = sorted(seen - emb_seen)[:5]
        only_emb = sorted(emb_seen - seen)[:5]
        raise IdSetMismatchError(
            f"id sets differ: catalog-only {only_cat}, embeddings-only {only_emb}"
        )

    store = EmbeddingStore(emb_ids, emb_data, normalize=True)
    items = [
        Item(item_id, category, image_ref, store.row_of(item_id))
        for item_id, category, image_ref in records
    ]
    return Catalog(items, store)
