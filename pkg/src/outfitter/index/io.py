"""Index persistence: little-endian "KKIX" blobs bound to a store by hash.

    magic "KKIX" | u32 version=1 | u8 kind | 32-byte store hash | config | payload

Indexes reference their store's vectors rather than copying them, so load
requires the same store and verifies it by content hash.
"""
from __future__ import annotations

import struct

import numpy as np

from ..catalog import EmbeddingStore
from ..errors import (
    MalformedRecordError,
    StoreMismatchError,
    TruncatedInputError,
    VersionMismatchError,
)
from .base import IndexConfig, IndexKind, VectorIndex
from .flat import FlatIndex
from .forest import ForestIndex
from .hnsw import HnswIndex
from .ivf import IvfIndex

INDEX_MAGIC = b"KKIX"
INDEX_VERSION = 1

_KIND_TAGS = {
    IndexKind.FLAT: 0,
    IndexKind.IVF: 1,
    IndexKind.HNSW: 2,
    IndexKind.FOREST: 3,
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

_CONFIG_FMT = "<8Iq"

_DTYPE_CODES = {
    np.dtype(np.int32): 0,
    np.dtype(np.int64): 1,
    np.dtype(np.float32): 2,
    np.dtype(np.uint8): 3,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def _pack_config(cfg: IndexConfig) -> bytes:
    return struct.pack(
        _CONFIG_FMT,
        cfg.ivf_nlist, cfg.ivf_nprobe,
        cfg.hnsw_M, cfg.hnsw_ef_construction, cfg.hnsw_ef_search,
        cfg.forest_n_trees, cfg.forest_search_k, cfg.forest_leaf_size,
        cfg.seed,
    )


def _pack_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    code = _DTYPE_CODES[arr.dtype]
    head = struct.pack("<BB", code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return head + dims + arr.tobytes()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise TruncatedInputError(
                f"index blob ended at byte {len(self.blob)}, "
                f"needed {self.off + n}"
            )
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self) -> np.ndarray:
        code, ndim = self.unpack("<BB")
        if code not in _CODE_DTYPES:
            raise MalformedRecordError(f"unknown array dtype code {code}")
        dims = self.unpack(f"<{ndim}Q") if ndim else ()
        dtype = _CODE_DTYPES[code]
        count = int(np.prod(dims)) if dims else 1
        raw = self.take(count * dtype.itemsize)
        return np.frombuffer(raw, dtype=dtype).reshape(dims).copy()

    def done(self) -> None:
        if self.off != len(self.blob):
            raise MalformedRecordError(
                f"{len(self.blob) - self.off} trailing bytes in index blob"
            )


def save_index(index: VectorIndex) -> bytes:
    parts = [
        INDEX_MAGIC,
        struct.pack("<IB", INDEX_VERSION, _KIND_TAGS[index.kind]),
        index.store.content_hash(),
        _pack_config(index.cfg),
    ]
    if index.kind is IndexKind.IVF:
        parts += [
            _pack_array(index.centroids),
            _pack_array(index.list_offsets),
            _pack_array(index.list_rows),
        ]
    elif index.kind is IndexKind.HNSW:
        parts.append(struct.pack("<ii", index.entry, index.max_level))
        parts += [
            _pack_array(index.levels),
            _pack_array(index.nbr_off),
            _pack_array(index.cnt_off),
            _pack_array(index.nbrs),
            _pack_array(index.cnts),
        ]
    elif index.kind is IndexKind.FOREST:
        parts += [
            _pack_array(index.node_left),
            _pack_array(index.node_right),
            _pack_array(index.node_split),
            _pack_array(index.split_w),
            _pack_array(index.split_b),
            _pack_array(index.leaf_start),
            _pack_array(index.leaf_count),
            _pack_array(index.leaf_items),
            _pack_array(index.roots),
        ]
    return b"".join(parts)


def load_index(blob: bytes, store: EmbeddingStore) -> VectorIndex:
    r = _Reader(blob)
    magic = r.take(4)
    if magic != INDEX_MAGIC:
        raise MalformedRecordError("not an index blob (bad magic)")
    version, tag = r.unpack("<IB")
    if version != INDEX_VERSION:
        raise VersionMismatchError(f"unsupported index version {version}")
    if tag not in _TAG_KINDS:
        raise MalformedRecordError(f"unknown index kind tag {tag}")
    kind = _TAG_KINDS[tag]
    stored_hash = r.take(32)
    if stored_hash != store.content_hash():
        raise StoreMismatchError("index was built over a different store")
    vals = r.unpack(_CONFIG_FMT)
    cfg = IndexConfig(
        kind=kind,
        ivf_nlist=vals[0], ivf_nprobe=vals[1],
        hnsw_M=vals[2], hnsw_ef_construction=vals[3], hnsw_ef_search=vals[4],
        forest_n_trees=vals[5], forest_search_k=vals[6], forest_leaf_size=vals[7],
        seed=vals[8],
    )
    if kind is IndexKind.FLAT:
        index: VectorIndex = FlatIndex(store, cfg)
    elif kind is IndexKind.IVF:
        centroids = r.array()
        list_offsets = r.array()
        list_rows = r.array()
        index = IvfIndex(store, cfg, centroids, list_offsets, list_rows)
    elif kind is IndexKind.HNSW:
        entry, max_level = r.unpack("<ii")
        levels = r.array()
        nbr_off = r.array()
        cnt_off = r.array()
        nbrs = r.array()
        cnts = r.array()
        index = HnswIndex(
            store, cfg, levels, nbr_off, cnt_off, nbrs, cnts, entry, max_level
        )
    else:
        index = ForestIndex(
            store, cfg,
            r.array(), r.array(), r.array(), r.array(), r.array(),
            r.array(), r.array(), r.array(), r.array(),
        )
    r.done()
    return index
