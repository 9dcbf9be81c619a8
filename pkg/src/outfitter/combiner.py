"""Fusion network mapping (image embedding, text embedding) to one query vector.

Architecture: concat of the two normalized inputs -> hidden (relu) -> dim,
blended with their convex combination through a learnable gate lam in [0, 1]:

    out = unit( lam * net(concat(ni, nt)) + (1 - lam) * (ni + nt) / 2 )

With lam = 0 the network is bypassed entirely, which yields an analytic
identity case (zero text input reduces to image-only search). Training uses
a symmetric contrastive objective over in-batch negatives.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import (
    DimensionMismatchError,
    InsufficientDataError,
    MalformedRecordError,
    NonFiniteLossError,
    TruncatedInputError,
    VersionMismatchError,
)
from .optim import AdamW

COMBINER_MAGIC = b"KKCM"
COMBINER_VERSION = 1
DEFAULT_TEMPERATURE = 0.07


def _safe_unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 1e-12)


class CombinerParams:
    """Learnable state of the fusion network."""

    def __init__(self, dim: int, hidden: int | None = None, seed: int = 0):
        if hidden is None:
            hidden = 4 * dim
        self.dim = dim
        self.hidden = hidden
        rng = np.random.default_rng(seed)

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        self.w1 = ad.Tensor(uniform(2 * dim, (2 * dim, hidden)), trainable=True)
        self.b1 = ad.Tensor(np.zeros(hidden), trainable=True)
        self.w2 = ad.Tensor(uniform(hidden, (hidden, dim)), trainable=True)
        self.b2 = ad.Tensor(np.zeros(dim), trainable=True)
        # network-dominant start; the gate learns how much of the plain
        # convex combination of the inputs to blend back in
        self.lam = ad.Tensor(np.float64(0.9), trainable=True)

    def tensors(self) -> dict[str, ad.Tensor]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "lam": self.lam}

    def parameter_count(self) -> int:
        return sum(t.value.size for t in self.tensors().values())

    def clip_gate(self) -> None:
        self.lam.value = np.clip(self.lam.value, 0.0, 1.0)


def _combine_batch(params: CombinerParams, ni: np.ndarray, nt: np.ndarray) -> ad.Tensor:
    """Tape forward over pre-normalized (B, dim) inputs; output rows unit."""
    z = ad.Tensor(np.concatenate([ni, nt], axis=-1))
    h = ad.relu(ad.add(ad.matmul(z, params.w1), params.b1))
    net = ad.add(ad.matmul(h, params.w2), params.b2)
    convex = ad.Tensor(0.5 * (ni + nt))
    mix = ad.add(ad.mul(params.lam, net), ad.mul(ad.sub(1.0, params.lam), convex))
    norms = np.linalg.norm(mix.value, axis=-1)
    if np.any(norms < 1e-12):
        raise ValueError("combiner produced a zero vector; cannot normalize")
    return ad.unit_rows(mix)


def combine(params: CombinerParams, img_emb: np.ndarray, txt_emb: np.ndarray) -> np.ndarray:
    """Fuse one image embedding and one text embedding into a unit query vector."""
    img_emb = np.asarray(img_emb, dtype=np.float64).reshape(-1)
    txt_emb = np.asarray(txt_emb, dtype=np.float64).reshape(-1)
    if img_emb.shape[0] != params.dim or txt_emb.shape[0] != params.dim:
        raise DimensionMismatchError(
            f"combine expects dim {params.dim}, got "
            f"{img_emb.shape[0]} and {txt_emb.shape[0]}"
        )
    ni = _safe_unit_rows(img_emb[None, :])
    nt = _safe_unit_rows(txt_emb[None, :])
    return _combine_batch(params, ni, nt).value[0]


def symmetric_contrastive_loss(
    queries: np.ndarray, targets: np.ndarray, temperature: float = DEFAULT_TEMPERATURE
) -> float:
    """Mean of the two directional cross-entropies over the B x B score matrix."""
    queries = np.asarray(queries, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    b = queries.shape[0]
    if b < 2:
        raise InsufficientDataError("contrastive loss needs a batch of >= 2")
    if queries.shape != targets.shape:
        raise DimensionMismatchError("queries and targets must share a shape")
    logits = queries @ targets.T / temperature

    def directional(m):
        mx = m.max(axis=1, keepdims=True)
        lse = np.log(np.exp(m - mx).sum(axis=1)) + mx[:, 0]
        return float(np.mean(lse - np.diag(m)))

    return 0.5 * (directional(logits) + directional(logits.T))


def _sym_loss_tape(q: ad.Tensor, targets: np.ndarray, temperature: float) -> ad.Tensor:
    b = targets.shape[0]
    t_const = ad.Tensor(np.ascontiguousarray(targets.T))
    logits = ad.mul(ad.matmul(q, t_const), 1.0 / temperature)
    idx = (np.arange(b), np.arange(b))
    diag = ad.getitem(logits, idx)
    row_loss = ad.mean(ad.sub(ad.logsumexp(logits, axis=1), diag))
    col_loss = ad.mean(ad.sub(ad.logsumexp(logits, axis=0), diag))
    return ad.mul(ad.add(row_loss, col_loss), 0.5)


@dataclass
class CombinerTrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.01
    epochs: int = 30
    batch: int = 64
    seed: int = 0
    temperature: float = DEFAULT_TEMPERATURE


def train_combiner(
    params: CombinerParams,
    triples: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    config: CombinerTrainConfig,
) -> tuple[CombinerParams, list[float]]:
    """Fit the network so combined queries align with their target embeddings."""
    if len(triples) < 2:
        raise InsufficientDataError("training needs at least 2 triples")
    if config.epochs == 0:
        return params, []
    refs = _safe_unit_rows(np.stack([t[0] for t in triples]))
    texts = _safe_unit_rows(np.stack([t[1] for t in triples]))
    targets = _safe_unit_rows(np.stack([t[2] for t in triples]))
    if refs.shape[1] != params.dim:
        raise DimensionMismatchError(
            f"triples have dim {refs.shape[1]}, params expect {params.dim}"
        )
    rng = np.random.default_rng(config.seed)
    opt = AdamW(params.tensors(), lr=config.lr, weight_decay=config.weight_decay)
    trace: list[float] = []
    n = len(triples)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        losses: list[float] = []
        for start in range(0, n, config.batch):
            sel = order[start : start + config.batch]
            if sel.size < 2:
                continue
            opt.zero_grad()
            q = _combine_batch(params, refs[sel], texts[sel])
            loss = _sym_loss_tape(q, targets[sel], config.temperature)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(f"non-finite combiner loss: {value}")
            loss.backward()
            opt.step()
            params.clip_gate()
            losses.append(value)
        trace.append(float(np.mean(losses)))
    return params, trace


def save_combiner(params: CombinerParams) -> bytes:
    parts = [
        COMBINER_MAGIC,
        struct.pack("<IIIf", COMBINER_VERSION, params.dim, params.hidden,
                    float(params.lam.value)),
    ]
    for t in (params.w1, params.b1, params.w2, params.b2):
        parts.append(t.value.astype("<f4").tobytes())
    return b"".join(parts)


def load_combiner(blob: bytes) -> CombinerParams:
    if len(blob) < 4 or blob[:4] != COMBINER_MAGIC:
        raise MalformedRecordError("not a combiner blob (bad magic)")
    if len(blob) < 20:
        raise TruncatedInputError("combiner blob shorter than its header")
    version, dim, hidden, lam = struct.unpack_from("<IIIf", blob, 4)
    if version != COMBINER_VERSION:
        raise VersionMismatchError(f"unsupported combiner version {version}")
    params = CombinerParams(dim, hidden, seed=0)
    off = 20
    for t, shape in (
        (params.w1, (2 * dim, hidden)),
        (params.b1, (hidden,)),
        (params.w2, (hidden, dim)),
        (params.b2, (dim,)),
    ):
        count = int(np.prod(shape))
        end = off + count * 4
        if end > len(blob):
            raise TruncatedInputError("combiner blob ended inside a layer payload")
        t.value = np.frombuffer(blob, dtype="<f4", count=count, offset=off).astype(
            np.float64
        ).reshape(shape)
        off = end
    if off != len(blob):
        raise MalformedRecordError("trailing bytes in combiner blob")
    params.lam.value = np.float64(lam)
    return params
