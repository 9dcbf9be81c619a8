"""Complementary-item recommender: a transformer encoder over category slots.

An outfit is a fixed-length sequence with one slot per category. Slots carry
either an item's visual embedding (INPUT), a shared learnable placeholder for
items to predict (OUT), or a shared placeholder for absent categories (UN).
Every slot also receives a learnable positional embedding tied to its
category. Encoder outputs at OUT slots are the predicted item embeddings,
trained with a noise-contrastive loss over cosine scores:

    loss = -(1/N) * sum_i log( exp(s_pos_i) / (exp(s_pos_i) + exp(s_neg_i)) )

where s_pos_i is the cosine between prediction i and its ground truth and
s_neg_i is the summed cosine against same-category negative samples.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .catalog import Catalog, Category, EmbeddingStore, Item, NUM_CATEGORIES, items_by_category
from .errors import (
    DimensionMismatchError,
    DuplicateCategoryError,
    EmptyNegativesError,
    EmptyOutfitError,
    InsufficientDataError,
    MalformedRecordError,
    NonFiniteLossError,
    RefInTargetsError,
    TruncatedInputError,
    VersionMismatchError,
)
from .optim import AdamW, step_decay

TRANSFORMER_MAGIC = b"KKTF"
TRANSFORMER_VERSION = 1

ROLE_INPUT = 0
ROLE_OUT = 1
ROLE_UN = 2


@dataclass
class OutfitSample:
    """One category-slot sequence ready for the encoder."""

    roles: np.ndarray          # (L,) int8 of ROLE_* tags
    inputs: np.ndarray         # (L, dim) float64; rows only meaningful at INPUT
    truth_ids: list[str | None]  # ground-truth item per OUT slot (training only)

    @property
    def seq_len(self) -> int:
        return self.roles.shape[0]

    def out_slots(self) -> np.ndarray:
        return np.flatnonzero(self.roles == ROLE_OUT)


@dataclass(frozen=True)
class TransformerConfig:
    dim: int = 640
    seq_len: int = NUM_CATEGORIES
    layers: int = 6
    heads: int = 8
    ff_dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")
        if self.dim % self.heads != 0:
            raise ValueError("dim must be divisible by heads")

    @property
    def ff(self) -> int:
        return self.ff_dim if self.ff_dim is not None else 4 * self.dim


class TransformerParams:
    """All learnable weights: encoder stack, role tokens, positional table."""

    def __init__(self, cfg: TransformerConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d, ff, L = cfg.dim, cfg.ff, cfg.seq_len

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        t = {}
        t["pos"] = uniform(d, (L, d))
        t["out_token"] = uniform(d, (d,))
        t["un_token"] = uniform(d, (d,))
        for i in range(cfg.layers):
            p = f"layer{i}."
            t[p + "ln1_g"] = np.ones(d)
            t[p + "ln1_b"] = np.zeros(d)
            for name in ("wq", "wk", "wv", "wo"):
                t[p + name] = uniform(d, (d, d))
            for name in ("bq", "bk", "bv", "bo"):
                t[p + name] = np.zeros(d)
            t[p + "ln2_g"] = np.ones(d)
            t[p + "ln2_b"] = np.zeros(d)
            t[p + "ff_w1"] = uniform(d, (d, ff))
            t[p + "ff_b1"] = np.zeros(ff)
            t[p + "ff_w2"] = uniform(ff, (ff, d))
            t[p + "ff_b2"] = np.zeros(d)
        t["lnf_g"] = np.ones(d)
        t["lnf_b"] = np.zeros(d)
        self._tensors = {k: ad.Tensor(v, trainable=True) for k, v in t.items()}

    def tensors(self) -> dict[str, ad.Tensor]:
        return self._tensors

    def __getitem__(self, key: str) -> ad.Tensor:
        return self._tensors[key]

    def parameter_count(self) -> int:
        return sum(t.value.size for t in self._tensors.values())


# --- role splitting -----------------------------------------------------------


def _check_outfit(items: Sequence[Item]) -> None:
    if not items:
        raise EmptyOutfitError("outfit holds no items")
    cats = [it.category for it in items]
    if len(set(cats)) != len(cats):
        raise DuplicateCategoryError("outfit holds two items of one category")


def split_training_roles(
    store: EmbeddingStore,
    items: Sequence[Item],
    rng: np.random.Generator,
    seq_len: int = NUM_CATEGORIES,
) -> OutfitSample | None:
    """Assign a uniformly random non-empty strict subset of items to INPUT.

    The remaining items become OUT; absent categories become UN. Outfits with
    fewer than two items cannot yield both roles and are skipped with a
    warning (returns None).
    """
    _check_outfit(items)
    if seq_len < NUM_CATEGORIES:
        raise ValueError(f"catalog outfits need seq_len >= {NUM_CATEGORIES}")
    m = len(items)
    if m < 2:
        warnings.warn(
            f"skipping outfit with a single item ({items[0].id}); "
            "training needs both INPUT and OUT roles",
            stacklevel=2,
        )
        return None
    mask = int(rng.integers(1, 2**m - 1))  # uniform over non-empty strict subsets
    roles = np.full(seq_len, ROLE_UN, dtype=np.int8)
    inputs = np.zeros((seq_len, store.dim), dtype=np.float64)
    truth_ids: list[str | None] = [None] * seq_len
    for j, item in enumerate(items):
        slot = item.category.value
        if mask >> j & 1:
            roles[slot] = ROLE_INPUT
            inputs[slot] = store.data[item.embedding_row]
        else:
            roles[slot] = ROLE_OUT
            truth_ids[slot] = item.id
    return OutfitSample(roles, inputs, truth_ids)


def split_inference_roles(
    store: EmbeddingStore,
    ref: Item,
    targets: Iterable[Category],
    seq_len: int = NUM_CATEGORIES,
) -> OutfitSample:
    """Reference item is the only INPUT; target categories become OUT."""
    targets = list(targets)
    if seq_len < NUM_CATEGORIES:
        raise ValueError(f"catalog outfits need seq_len >= {NUM_CATEGORIES}")
    if ref.category in targets:
        raise RefInTargetsError(
            f"reference category {ref.category.label!r} cannot be a target"
        )
    roles = np.full(seq_len, ROLE_UN, dtype=np.int8)
    inputs = np.zeros((seq_len, store.dim), dtype=np.float64)
    roles[ref.category.value] = ROLE_INPUT
    inputs[ref.category.value] = store.data[ref.embedding_row]
    for cat in targets:
        roles[cat.value] = ROLE_OUT
    return OutfitSample(roles, inputs, [None] * seq_len)


# --- encoder forward -----------------------------------------------------------


def _forward_batch(params: TransformerParams, roles: np.ndarray,
                   inputs: np.ndarray) -> ad.Tensor:
    """Encode a batch: roles (B, L) int8, inputs (B, L, dim) -> (B, L, dim)."""
    cfg = params.cfg
    B, L = roles.shape
    d, H = cfg.dim, cfg.heads
    dh = d // H
    mask_out = (roles == ROLE_OUT).astype(np.float64)[:, :, None]
    mask_un = (roles == ROLE_UN).astype(np.float64)[:, :, None]
    x = ad.add(
        ad.add(
            ad.Tensor(inputs),
            ad.add(
                ad.mul(ad.Tensor(mask_out), params["out_token"]),
                ad.mul(ad.Tensor(mask_un), params["un_token"]),
            ),
        ),
        params["pos"],
    )
    scale = 1.0 / np.sqrt(dh)
    for i in range(cfg.layers):
        p = f"layer{i}."
        h = ad.layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])

        def heads(t: ad.Tensor) -> ad.Tensor:
            return ad.transpose(ad.reshape(t, (B, L, H, dh)), (0, 2, 1, 3))

        q = heads(ad.add(ad.matmul(h, params[p + "wq"]), params[p + "bq"]))
        k = heads(ad.add(ad.matmul(h, params[p + "wk"]), params[p + "bk"]))
        v = heads(ad.add(ad.matmul(h, params[p + "wv"]), params[p + "bv"]))
        scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), scale)
        attn = ad.softmax(scores, axis=-1)
        ctx = ad.reshape(ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3)), (B, L, d))
        x = ad.add(x, ad.add(ad.matmul(ctx, params[p + "wo"]), params[p + "bo"]))
        h2 = ad.layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        ff = ad.matmul(
            ad.relu(ad.add(ad.matmul(h2, params[p + "ff_w1"]), params[p + "ff_b1"])),
            params[p + "ff_w2"],
        )
        x = ad.add(x, ad.add(ff, params[p + "ff_b2"]))
    return ad.layer_norm(x, params["lnf_g"], params["lnf_b"])


def encoder_forward(params: TransformerParams, sample: OutfitSample) -> np.ndarray:
    """Encode one sample; outputs at OUT slots are the predicted embeddings."""
    if sample.inputs.shape != (params.cfg.seq_len, params.cfg.dim):
        raise DimensionMismatchError(
            f"sample shape {sample.inputs.shape} does not match config "
            f"({params.cfg.seq_len}, {params.cfg.dim})"
        )
    out = _forward_batch(params, sample.roles[None, :], sample.inputs[None, :, :])
    return out.value[0]


# --- noise-contrastive loss -----------------------------------------------------


def nce_loss(
    preds: np.ndarray,
    positives: np.ndarray,
    negatives: Sequence[np.ndarray],
) -> float:
    """Mean contrastive term over predictions (see module docstring formula)."""
    preds = np.asarray(preds, dtype=np.float64)
    positives = np.asarray(positives, dtype=np.float64)
    if preds.ndim != 2 or preds.shape != positives.shape:
        raise DimensionMismatchError("preds and positives must be (N, dim)")
    n = preds.shape[0]
    if n < 1:
        raise InsufficientDataError("nce_loss needs at least one prediction")
    if len(negatives) != n:
        raise DimensionMismatchError("one negative set required per prediction")
    total = 0.0
    for i in range(n):
        neg = np.asarray(negatives[i], dtype=np.float64)
        if neg.size == 0:
            raise EmptyNegativesError(f"prediction {i} has no negative samples")
        pn = np.linalg.norm(preds[i])
        s_pos = preds[i] @ positives[i] / (pn * np.linalg.norm(positives[i]))
        s_neg = float(
            np.sum(neg @ preds[i] / (pn * np.linalg.norm(neg, axis=1)))
        )
        total += np.logaddexp(0.0, s_neg - s_pos)  # -log(e^p / (e^p + e^n))
    loss = total / n
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"non-finite contrastive loss: {loss}")
    return float(loss)


def _nce_loss_tape(
    preds: ad.Tensor,
    positives: np.ndarray,
    negs: np.ndarray,
    neg_mask: np.ndarray,
) -> ad.Tensor:
    """Tape version over padded negatives: negs (N, K, d), neg_mask (N, K)."""
    n, _, d = negs.shape
    pred_sq = ad.sum_(ad.mul(preds, preds), axis=-1)
    pred_norm = ad.sqrt(ad.add(pred_sq, 1e-24))
    pos_norm = np.linalg.norm(positives, axis=1)
    s_pos = ad.div(
        ad.sum_(ad.mul(preds, ad.Tensor(positives)), axis=-1),
        ad.mul(pred_norm, ad.Tensor(pos_norm)),
    )
    neg_norms = np.linalg.norm(negs, axis=2)
    neg_norms[neg_mask == 0] = 1.0
    p3 = ad.reshape(preds, (n, 1, d))
    dots = ad.sum_(ad.mul(p3, ad.Tensor(negs)), axis=-1)  # (N, K)
    cosines = ad.div(dots, ad.mul(ad.reshape(pred_norm, (n, 1)), ad.Tensor(neg_norms)))
    s_neg = ad.sum_(ad.mul(cosines, ad.Tensor(neg_mask)), axis=-1)
    return ad.mean(ad.softplus(ad.sub(s_neg, s_pos)))


# --- training --------------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 1e-4
    weight_decay: float = 0.3
    step_size: int = 20
    gamma: float = 0.5
    epochs: int = 50
    batch_size: int = 16
    negatives: int = 16
    seed: int = 0


def _sample_negatives(
    catalog: Catalog,
    positive: Item,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray | None:
    pool = [it for it in items_by_category(catalog, positive.category)
            if it.id != positive.id]
    if not pool:
        return None
    take = min(count, len(pool))
    sel = rng.choice(len(pool), size=take, replace=False)
    rows = [pool[int(j)].embedding_row for j in sel]
    return catalog.store.data[rows].astype(np.float64)


def train(
    params: TransformerParams,
    outfits: Sequence[Sequence[Item]],
    catalog: Catalog,
    cfg: TrainConfig,
) -> tuple[TransformerParams, list[float]]:
    """Fit the encoder on outfit fill-in tasks with same-category negatives."""
    usable = [list(o) for o in outfits if len(o) >= 1]
    if not usable:
        raise InsufficientDataError("no outfits to train on")
    rng = np.random.default_rng(cfg.seed)
    opt = AdamW(params.tensors(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    trace: list[float] = []
    L = params.cfg.seq_len
    for epoch in range(cfg.epochs):
        lr = step_decay(cfg.lr, epoch, cfg.step_size, cfg.gamma)
        order = rng.permutation(len(usable))
        losses: list[float] = []
        for start in range(0, len(usable), cfg.batch_size):
            batch = [usable[int(i)] for i in order[start : start + cfg.batch_size]]
            samples = []
            for outfit in batch:
                s = split_training_roles(catalog.store, outfit, rng, seq_len=L)
                if s is not None:
                    samples.append(s)
            if not samples:
                continue
            roles = np.stack([s.roles for s in samples])
            inputs = np.stack([s.inputs for s in samples])
            sel: list[tuple[int, int, Item, np.ndarray]] = []
            for b, s in enumerate(samples):
                for slot in s.out_slots():
                    item = catalog.get(s.truth_ids[slot])
                    negs = _sample_negatives(catalog, item, cfg.negatives, rng)
                    if negs is not None:
                        sel.append((b, int(slot), item, negs))
            if not sel:
                continue
            opt.zero_grad()
            x = _forward_batch(params, roles, inputs)
            b_idx = np.array([s[0] for s in sel])
            s_idx = np.array([s[1] for s in sel])
            preds = ad.getitem(x, (b_idx, s_idx))
            positives = np.stack(
                [catalog.store.data[s[2].embedding_row].astype(np.float64) for s in sel]
            )
            kmax = max(s[3].shape[0] for s in sel)
            negs = np.zeros((len(sel), kmax, params.cfg.dim), dtype=np.float64)
            neg_mask = np.zeros((len(sel), kmax), dtype=np.float64)
            for i, (_, _, _, ne) in enumerate(sel):
                negs[i, : ne.shape[0]] = ne
                neg_mask[i, : ne.shape[0]] = 1.0
            loss = _nce_loss_tape(preds, positives, negs, neg_mask)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(f"non-finite training loss: {value}")
            loss.backward()
            opt.step(lr=lr)
            losses.append(value)
        if not losses:
            raise InsufficientDataError(
                "training made no progress: every outfit was skipped"
            )
        trace.append(float(np.mean(losses)))
    return params, trace


# --- inference --------------------------------------------------------------------


def predict_for_vector(
    params: TransformerParams,
    ref_category: Category,
    ref_vector: np.ndarray,
    targets: Iterable[Category],
) -> dict[Category, np.ndarray]:
    """Predicted unit embedding per target category for a raw reference vector."""
    targets = list(targets)
    if ref_category in targets:
        raise RefInTargetsError(
            f"reference category {ref_category.label!r} cannot be a target"
        )
    L, d = params.cfg.seq_len, params.cfg.dim
    ref_vector = np.asarray(ref_vector, dtype=np.float64).reshape(-1)
    if ref_vector.shape[0] != d:
        raise DimensionMismatchError(f"reference vector must have dim {d}")
    roles = np.full(L, ROLE_UN, dtype=np.int8)
    inputs = np.zeros((L, d), dtype=np.float64)
    roles[ref_category.value] = ROLE_INPUT
    inputs[ref_category.value] = ref_vector
    for cat in targets:
        roles[cat.value] = ROLE_OUT
    sample = OutfitSample(roles, inputs, [None] * L)
    out = encoder_forward(params, sample)
    result: dict[Category, np.ndarray] = {}
    for slot in sample.out_slots():
        vec = out[slot]
        result[Category(int(slot))] = vec / np.linalg.norm(vec)
    return result


def recommend_embeddings(
    params: TransformerParams,
    store: EmbeddingStore,
    ref: Item,
    targets: Iterable[Category],
) -> dict[Category, np.ndarray]:
    """Predicted unit embedding per target category for one reference item."""
    return predict_for_vector(
        params, ref.category, store.data[ref.embedding_row], targets
    )


# --- persistence -------------------------------------------------------------------


def save_transformer(params: TransformerParams) -> bytes:
    cfg = params.cfg
    parts = [
        TRANSFORMER_MAGIC,
        struct.pack(
            "<IIIIIIq",
            TRANSFORMER_VERSION, cfg.dim, cfg.seq_len, cfg.layers, cfg.heads,
            cfg.ff, cfg.seed,
        ),
    ]
    for t in params.tensors().values():
        parts.append(t.value.astype("<f4").tobytes())
    return b"".join(parts)


def load_transformer(blob: bytes) -> TransformerParams:
    if len(blob) < 4 or blob[:4] != TRANSFORMER_MAGIC:
        raise MalformedRecordError("not a transformer blob (bad magic)")
    head = struct.calcsize("<IIIIIIq")
    if len(blob) < 4 + head:
        raise TruncatedInputError("transformer blob shorter than its header")
    version, dim, seq_len, layers, heads, ff, seed = struct.unpack_from(
        "<IIIIIIq", blob, 4
    )
    if version != TRANSFORMER_VERSION:
        raise VersionMismatchError(f"unsupported transformer version {version}")
    cfg = TransformerConfig(
        dim=dim, seq_len=seq_len, layers=layers, heads=heads, ff_dim=ff, seed=seed
    )
    params = TransformerParams(cfg)
    off = 4 + head
    for t in params.tensors().values():
        count = t.value.size
        end = off + count * 4
        if end > len(blob):
            raise TruncatedInputError("transformer blob ended inside a payload")
        t.value = np.frombuffer(blob, dtype="<f4", count=count, offset=off).astype(
            np.float64
        ).reshape(t.value.shape)
        off = end
    if off != len(blob):
        raise MalformedRecordError("trailing bytes in transformer blob")
    return params
