"""Encoder-only token classifiers: per-attribute value tagger and closed-set attribute tagger."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from ..text import Vocab, all_true_mask, build_tocve_input
from ..types import AVPair
from .base import TAGGER_KINDS, BaseModel, pad_batch
from .layers import Ctx, ModelConfig, ParamInit, encode

OUTSIDE = "O"


@dataclass
class TagRecord:
    ids: list[int]
    labels: list[int]          # per token; ignored where weight is 0
    weights: list[float]
    marker: np.ndarray | None = None


@dataclass
class TagBatch:
    ids: np.ndarray
    pad: np.ndarray
    marker: np.ndarray | None
    labels: np.ndarray
    weights: np.ndarray


class TaggerModel(BaseModel):
    def __init__(self, kind: str, config: ModelConfig, vocab: Vocab, params, extra=None):
        if kind not in TAGGER_KINDS:
            raise ValueError(f"not a tagger kind: {kind}")
        self.kind = kind
        super().__init__(config, vocab, params, extra)
        self.labels: list[str] = list(self.extra.get("labels", ["no", "yes"]))
        self.label_index = {l: i for i, l in enumerate(self.labels)}

    @classmethod
    def create(cls, kind: str, config: ModelConfig, vocab: Vocab, seed: int,
               labels: Sequence[str] | None = None, extra=None) -> "TaggerModel":
        if kind == "tocve":
            config.marker_enabled = False
            labels = ["no", "yes"]
        else:
            if labels is None:
                raise ValueError("tocave needs its closed label set")
            labels = [OUTSIDE] + sorted(set(labels) - {OUTSIDE})
        config.vocab_size = len(vocab)
        config.n_decoder_layers = 0
        init = ParamInit(seed)
        d = config.d_model
        init.normal("tok_emb", (len(vocab), d))
        init.normal("enc_pos", (config.max_len, d))
        for i in range(config.n_encoder_layers):
            init.encoder_layer(f"enc.{i}", config)
        init.norm("enc.ln", d)
        init.linear("head", d, len(labels))
        if config.marker_enabled:
            init.normal("marker", (d,), std=config.marker_init_std)
        return cls(kind, config, vocab, init.params, {**(extra or {}), "labels": list(labels)})

    def collate(self, records: Sequence[TagRecord]) -> TagBatch:
        ids, pad = pad_batch([r.ids for r in records], self.vocab.pad_id)
        labels, _ = pad_batch([r.labels for r in records], 0)
        weights, _ = pad_batch([r.weights for r in records], 0.0, dtype=np.float32)
        marker = None
        if self.config.marker_enabled:
            marker = np.zeros(ids.shape, dtype=bool)
            for i, r in enumerate(records):
                if r.marker is not None:
                    marker[i, : len(r.ids)] = r.marker
        return TagBatch(ids, pad, marker, labels, weights)

    def logits(self, ctx: Ctx, batch: TagBatch) -> Tensor:
        h = encode(ctx, batch.ids, batch.pad, batch.marker)
        return ctx.lin("head", h)

    def loss_from_logits(self, logits: Tensor, batch: TagBatch) -> Tensor:
        if self.kind == "tocve":
            # YES-vs-NO logit margin under a logistic loss
            margin = nx.sub(logits[..., 1], logits[..., 0])
            return nx.binary_cross_entropy_with_logits(margin, batch.labels, batch.weights)
        n = len(self.labels)
        return nx.cross_entropy(nx.reshape(logits, (-1, n)), batch.labels.reshape(-1), batch.weights.reshape(-1))

    def loss(self, batch: TagBatch, rng: np.random.Generator | None = None, training: bool = True) -> Tensor:
        ctx = Ctx(self.params, self.config, rng, training)
        return self.loss_from_logits(self.logits(ctx, batch), batch)

    def probs(self, batch: TagBatch) -> np.ndarray:
        with nx.no_grad():
            z = self.logits(Ctx(self.params, self.config), batch).data.astype(np.float64)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# value tagger (second stage)
# ---------------------------------------------------------------------------

YES_THRESHOLD = 0.5


def tocve_record(model: TaggerModel, attribute: str, words: Sequence[str], gold_yes: Sequence[int]) -> TagRecord:
    toks, offset = build_tocve_input(attribute, words)
    gold = set(gold_yes)
    if any(i < 0 or i >= len(words) for i in gold):
        raise ValueError(f"gold index out of range for {len(words)} words")
    if len(toks) > model.config.max_len:
        raise ValueError(f"input of {len(toks)} tokens exceeds max_len={model.config.max_len}")
    labels = [0] * offset + [1 if i in gold else 0 for i in range(len(words))]
    weights = [0.0] * offset + [1.0] * len(words)
    return TagRecord(model.vocab.encode(toks), labels, weights)


def tocve_loss(model: TaggerModel, attribute: str, words: Sequence[str], gold_yes: Sequence[int]) -> Tensor:
    batch = model.collate([tocve_record(model, attribute, words, gold_yes)])
    return model.loss(batch, training=False)


def tocve_predict_batch(model: TaggerModel, queries: Sequence[tuple[str, Sequence[str]]],
                        threshold: float = YES_THRESHOLD) -> list[list[int]]:
    if not queries:
        return []
    recs, offsets = [], []
    for attr, words in queries:
        rec = tocve_record(model, attr, words, ())
        recs.append(rec)
        offsets.append(len(rec.ids) - len(words))
    p = model.probs(model.collate(recs))
    out = []
    for i, ((_, words), off) in enumerate(zip(queries, offsets)):
        yes = p[i, off: off + len(words), 1]
        out.append([j for j in range(len(words)) if yes[j] > threshold])
    return out


def tocve_predict(model: TaggerModel, attribute: str, words: Sequence[str]) -> list[int]:
    return tocve_predict_batch(model, [(attribute, words)])[0]


# ---------------------------------------------------------------------------
# closed-set attribute tagger (single stage baseline)
# ---------------------------------------------------------------------------

def tocave_record(model: TaggerModel, words: Sequence[str], pairs: Sequence[AVPair],
                  marker: np.ndarray | None = None) -> TagRecord:
    labels = [0] * len(words)
    for p in pairs:
        lab = model.label_index.get(p.attribute)
        if lab is None:
            continue
        for i in p.value_indices:
            labels[i] = lab
    return TagRecord(model.vocab.encode(words), labels, [1.0] * len(words), marker)


def labels_to_pairs(labels: Sequence[str]) -> list[AVPair]:
    """Merge runs of the same non-O label into one pair each."""
    pairs, i = [], 0
    while i < len(labels):
        lab = labels[i]
        j = i + 1
        while j < len(labels) and labels[j] == lab:
            j += 1
        if lab != OUTSIDE:
            pairs.append(AVPair(lab, tuple(range(i, j))))
        i = j
    return pairs


def tocave_predict_batch(model: TaggerModel, names: Sequence[Sequence[str]]) -> list[list[AVPair]]:
    if not names:
        return []
    recs = [TagRecord(model.vocab.encode(w), [0] * len(w), [1.0] * len(w),
                      all_true_mask(len(w)) if model.config.marker_enabled else None) for w in names]
    p = model.probs(model.collate(recs))
    out = []
    for i, w in enumerate(names):
        arg = p[i, : len(w)].argmax(axis=-1)
        out.append(labels_to_pairs([model.labels[a] for a in arg]))
    return out


def tocave_predict(model: TaggerModel, words: Sequence[str]) -> list[AVPair]:
    return tocave_predict_batch(model, [words])[0]
