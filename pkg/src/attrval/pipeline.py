"""Training for every model kind, two-stage inference and training-set re-tagging."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as nx
from .corpus import load_jsonl, stats
from .models import (
    MODEL_KINDS,
    ModelConfig,
    Seq2SeqModel,
    Seq2SeqRecord,
    TaggerModel,
    check_compatible,
    genae_decode_batch,
    tocave_record,
    tocve_predict_batch,
    tocve_record,
)
from .text import (
    Vocab,
    build_genae_target,
    build_genave_target,
    build_marker_mask,
    build_rescorer_target,
    build_tocve_input,
    target_tokens,
)
from .types import AVPair, ProductExample

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainPlan:
    model_kind: str
    dataset: str | None = None
    config: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 10
    batch_size: int = 64
    seed: int = 0
    vp_rate: float = 0.3
    marker_enabled: bool = True
    lr: float = 1e-3
    warmup_steps: int = 100
    clip_norm: float = 1.0

    def __post_init__(self):
        if isinstance(self.config, dict):
            self.config = ModelConfig.from_json(self.config)
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}; expected one of {MODEL_KINDS}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.vp_rate <= 1.0:
            raise ValueError(f"vp_rate must be in [0, 1], got {self.vp_rate}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_json(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TrainPlan":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train-plan field(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainPlan":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def build_vocab(dataset: Sequence[ProductExample]) -> Vocab:
    """Name words plus tokens of every observed attribute (hidden labels are never read)."""
    toks = set()
    for ex in dataset:
        toks.update(ex.words)
        for p in ex.observed_pairs:
            toks.update(target_tokens(p.attribute))
    return Vocab.build(toks)


@dataclass(frozen=True)
class PrunedExample:
    attribute: str
    words: tuple[str, ...]


def _contains(words: Sequence[str], value: Sequence[str]) -> bool:
    n = len(value)
    return any(tuple(words[i:i + n]) == tuple(value) for i in range(len(words) - n + 1))


def make_value_pruning_examples(dataset: Sequence[ProductExample], rate: float, seed: int) -> list[PrunedExample]:
    """Negative value-tagger inputs: a pair's value words deleted from the name.

    A ``rate`` fraction of all (example, observed pair) combinations is drawn.
    Candidates are skipped when deletion empties the name, when another pair
    of the same attribute remains, or when the value still occurs elsewhere.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    combos = [(i, j) for i, ex in enumerate(dataset) for j in range(len(ex.observed_pairs))]
    k = int(round(rate * len(combos)))
    if k == 0:
        return []
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(combos), size=k, replace=False).tolist())
    out = []
    for c in chosen:
        i, j = combos[c]
        ex = dataset[i]
        pair = ex.observed_pairs[j]
        if any(q.attribute == pair.attribute for q in ex.observed_pairs if q is not pair):
            continue
        drop = set(pair.value_indices)
        rest = tuple(w for n, w in enumerate(ex.words) if n not in drop)
        if not rest or _contains(rest, pair.value(ex.words).split()):
            continue
        out.append(PrunedExample(pair.attribute, rest))
    return out


def make_records(model, dataset: Sequence[ProductExample], plan: TrainPlan) -> list:
    kind = model.kind
    recs = []
    v = model.vocab
    if kind == "genae":
        for ex in dataset:
            recs.append(Seq2SeqRecord(v.encode(ex.words), model.encode_target(build_genae_target(ex.observed_pairs)),
                                      build_marker_mask(len(ex.words), ex.observed_pairs)))
    elif kind == "genave":
        for ex in dataset:
            tgt = build_genave_target(ex.observed_pairs, ex.words)
            recs.append(Seq2SeqRecord(v.encode(ex.words), model.encode_target(tgt),
                                      build_marker_mask(len(ex.words), ex.observed_pairs)))
    elif kind == "rescorer":
        for ex in dataset:
            for p in ex.observed_pairs:
                tgt = build_rescorer_target(p.attribute, p.value(ex.words))
                recs.append(Seq2SeqRecord(v.encode(ex.words), model.encode_target(tgt)))
    elif kind == "tocve":
        for ex in dataset:
            for p in ex.observed_pairs:
                recs.append(tocve_record(model, p.attribute, ex.words, p.value_indices))
        for neg in make_value_pruning_examples(dataset, plan.vp_rate, plan.seed + 1):
            recs.append(tocve_record(model, neg.attribute, neg.words, ()))
    elif kind == "tocave":
        for ex in dataset:
            recs.append(tocave_record(model, ex.words, ex.observed_pairs,
                                      build_marker_mask(len(ex.words), ex.observed_pairs)))
    return recs


def _record_len(r) -> int:
    return len(r.src) + len(r.tgt) if isinstance(r, Seq2SeqRecord) else len(r.ids)


def make_batches(records: Sequence, batch_size: int, rng: np.random.Generator, pool: int = 50) -> list[list[int]]:
    """Shuffled batches of similar length (sorted within pools of ``pool`` batches)."""
    order = rng.permutation(len(records))
    batches = []
    step = batch_size * pool
    for s in range(0, len(order), step):
        chunk = sorted(order[s:s + step].tolist(), key=lambda i: _record_len(records[i]))
        batches.extend(chunk[b:b + batch_size] for b in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def create_model(plan: TrainPlan, vocab: Vocab, dataset: Sequence[ProductExample]):
    cfg = ModelConfig.from_json(plan.config.to_json())
    cfg.marker_enabled = plan.marker_enabled
    extra = {"plan": plan.to_json(), "seed": plan.seed}
    if plan.model_kind in ("genae", "genave", "rescorer"):
        return Seq2SeqModel.create(plan.model_kind, cfg, vocab, plan.seed, extra=extra)
    labels = None
    if plan.model_kind == "tocave":
        labels = sorted({p.attribute for ex in dataset for p in ex.observed_pairs})
    return TaggerModel.create(plan.model_kind, cfg, vocab, plan.seed, labels=labels, extra=extra)


def fit(model, records: Sequence, plan: TrainPlan) -> list[float]:
    if not records:
        raise ValueError(f"no training records for {model.kind}")
    rng = np.random.default_rng(plan.seed + 7919)
    opt = nx.Adam(model.params, lr=plan.lr, clip_norm=plan.clip_norm)
    steps_per_epoch = math.ceil(len(records) / plan.batch_size)
    total = steps_per_epoch * plan.epochs
    history = []
    step = 0
    for epoch in range(plan.epochs):
        run, n = 0.0, 0
        for idx in make_batches(records, plan.batch_size, rng):
            # linear warmup, then linear decay to 10% of the peak rate
            warm = min(1.0, (step + 1) / max(1, plan.warmup_steps))
            decay = 1.0 - 0.9 * step / max(1, total - 1)
            opt.state.lr = plan.lr * warm * decay
            batch = model.collate([records[i] for i in idx])
            opt.zero_grad()
            loss = model.loss(batch, rng)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(f"{model.kind}: non-finite loss at epoch {epoch + 1}, step {step}")
            nx.backward(loss)
            opt.step()
            run += value * len(idx)
            n += len(idx)
            step += 1
        history.append(run / n)
        log.info("%s epoch %d/%d loss %.4f", model.kind, epoch + 1, plan.epochs, history[-1])
    return history


def train(plan: TrainPlan, dataset: Sequence[ProductExample] | None = None, out=None, vocab: Vocab | None = None):
    """Train one model according to ``plan``; saves a checkpoint when ``out`` is given."""
    if dataset is None:
        if plan.dataset is None:
            raise ValueError("plan has no dataset path and no dataset was passed")
        dataset = load_jsonl(plan.dataset)
    if not dataset:
        raise ValueError("empty training dataset")
    vocab = vocab or build_vocab(dataset)
    model = create_model(plan, vocab, dataset)
    records = make_records(model, dataset, plan)
    history = fit(model, records, plan)
    model.extra["loss_history"] = history
    model.extra["n_records"] = len(records)
    if out is not None:
        model.save(out)
    return model


# ---------------------------------------------------------------------------
# two-stage inference
# ---------------------------------------------------------------------------

def _dedupe(attrs: Sequence[str]) -> list[str]:
    seen, out = set(), []
    for a in attrs:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def assemble_pairs(attrs: Sequence[str], values: Sequence[Sequence[int]]) -> list[AVPair]:
    """Drop attributes without values; words already claimed go to the earlier attribute."""
    claimed: set[int] = set()
    pairs = []
    for a, idx in zip(attrs, values):
        free = sorted(set(idx) - claimed)
        if not free:
            continue
        claimed.update(free)
        pairs.append(AVPair(a, tuple(free)))
    return pairs


def gentoc_infer_batch(names: Sequence[Sequence[str]], genae: Seq2SeqModel, tocve: TaggerModel,
                       chunk: int = 256) -> list[list[AVPair]]:
    check_compatible(genae, tocve)
    out = []
    for s in range(0, len(names), chunk):
        part = names[s:s + chunk]
        # an attribute too long to pair with the name cannot receive a value, so it is dropped
        attr_lists = [[a for a in _dedupe(attrs) if len(build_tocve_input(a, words)[0]) <= tocve.config.max_len]
                      for words, attrs in zip(part, genae_decode_batch(genae, part))]
        queries = [(a, words) for words, attrs in zip(part, attr_lists) for a in attrs]
        values = tocve_predict_batch(tocve, queries)
        k = 0
        for attrs in attr_lists:
            out.append(assemble_pairs(attrs, values[k:k + len(attrs)]))
            k += len(attrs)
    return out


def gentoc_infer(words: Sequence[str], genae: Seq2SeqModel, tocve: TaggerModel) -> list[AVPair]:
    return gentoc_infer_batch([tuple(words)], genae, tocve)[0]


def bootstrap(dataset: Sequence[ProductExample], genae: Seq2SeqModel, tocve: TaggerModel) -> tuple[list[ProductExample], dict]:
    """Replace every example's observed pairs by two-stage predictions."""
    before = stats(dataset)
    preds = gentoc_infer_batch([ex.words for ex in dataset], genae, tocve)
    retagged = [ex.with_observed(p) for ex, p in zip(dataset, preds)]
    return retagged, {"before": before, "after": stats(retagged)}
