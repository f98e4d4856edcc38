"""Independent sequence model that assigns a confidence to any (name, pair)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..models import Seq2SeqModel, Seq2SeqRecord
from ..pipeline import TrainPlan, train
from ..text import build_rescorer_target
from ..types import AVPair, ProductExample


def train_rescorer(dataset: Sequence[ProductExample], plan: TrainPlan | None = None, out=None) -> Seq2SeqModel:
    plan = plan or TrainPlan("rescorer")
    if plan.model_kind != "rescorer":
        plan = TrainPlan.from_json({**plan.to_json(), "model_kind": "rescorer"})
    return train(plan, dataset, out=out)


def confidence_from_logprobs(logprobs: np.ndarray) -> float:
    """Per-token geometric mean probability, exp(mean log p)."""
    return float(np.exp(np.mean(logprobs))) if len(logprobs) else 0.0


def score_pairs(rescorer: Seq2SeqModel, items: Sequence[tuple[Sequence[str], AVPair]],
                chunk: int = 512) -> list[float]:
    out: list[float] = []
    for s in range(0, len(items), chunk):
        recs = []
        for words, pair in items[s:s + chunk]:
            tgt = build_rescorer_target(pair.attribute, pair.value(words))
            recs.append(Seq2SeqRecord(rescorer.vocab.encode(words), rescorer.encode_target(tgt)))
        out.extend(confidence_from_logprobs(lp) for lp in rescorer.token_logprobs(rescorer.collate(recs)))
    return out


def score_pair(rescorer: Seq2SeqModel, words: Sequence[str], pair: AVPair) -> float:
    return score_pairs(rescorer, [(words, pair)])[0]


def score_extractions(rescorer: Seq2SeqModel, dataset: Sequence[ProductExample],
                      preds: Sequence[Sequence[AVPair]]) -> list[list[tuple[AVPair, float]]]:
    items = [(ex.words, p) for ex, ps in zip(dataset, preds) for p in ps]
    confs = iter(score_pairs(rescorer, items))
    return [[(p, next(confs)) for p in ps] for ps in preds]
