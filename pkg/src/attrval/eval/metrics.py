"""Per-example pair-set precision/recall/F1 and their macro averages."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..types import AVPair, DataError, ProductExample, covered_indices

LONG_NAME_WORDS = 9


def normalize_attribute(attr: str, synonyms: Mapping[str, str] | None = None) -> str:
    a = " ".join(attr.lower().split())
    if synonyms:
        a = synonyms.get(a, a)
    return a


def _keys(pairs: Sequence[AVPair], synonyms) -> Counter:
    return Counter((normalize_attribute(p.attribute, synonyms), frozenset(p.value_indices)) for p in pairs)


def pair_set_metrics(pred: Sequence[AVPair], gold: Sequence[AVPair],
                     synonyms: Mapping[str, str] | None = None) -> tuple[float, float, float]:
    p, r, f, _ = _example_scores(pred, gold, synonyms)
    return p, r, f


def _example_scores(pred, gold, synonyms=None):
    correct = sum((_keys(pred, synonyms) & _keys(gold, synonyms)).values())
    if pred:
        prec = correct / len(pred)
    else:
        prec = 1.0 if not gold else 0.0
    rec = correct / len(gold) if gold else 1.0
    f1 = 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)
    return prec, rec, f1, correct


@dataclass
class MetricsReport:
    n_examples: int
    precision: float
    recall: float
    f1: float
    f1_of_means: float          # F1 of the averaged precision and recall
    n_predicted: int
    n_gold: int
    n_correct: int
    tagged_ratio: float
    malformed: int = 0
    slices: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _tagged_ratio(words: Sequence[str], pairs: Sequence[AVPair]) -> float:
    return len(covered_indices(pairs) & set(range(len(words)))) / len(words)


def macro_scores(preds: Sequence[Sequence[AVPair]], golds: Sequence[Sequence[AVPair]],
                 synonyms=None) -> dict:
    ps, rs, fs, npred, ngold, ncorr = [], [], [], 0, 0, 0
    for pred, gold in zip(preds, golds):
        p, r, f, c = _example_scores(pred, gold, synonyms)
        ps.append(p)
        rs.append(r)
        fs.append(f)
        npred += len(pred)
        ngold += len(gold)
        ncorr += c
    P, R = float(np.mean(ps)), float(np.mean(rs))
    return {
        "precision": P,
        "recall": R,
        "f1": float(np.mean(fs)),
        "f1_of_means": 0.0 if P + R == 0 else 2 * P * R / (P + R),
        "n_predicted": npred,
        "n_gold": ngold,
        "n_correct": ncorr,
    }


def score_predictions(dataset: Sequence[ProductExample], preds: Sequence[Sequence[AVPair]],
                      malformed: Sequence[int] | None = None, long_threshold: int = LONG_NAME_WORDS,
                      synonyms=None) -> MetricsReport:
    """Macro-averaged metrics against hidden full labels when present, else observed ones."""
    if not dataset:
        raise DataError("empty dataset")
    if len(preds) != len(dataset):
        raise ValueError(f"{len(preds)} predictions for {len(dataset)} examples")
    golds = [ex.gold for ex in dataset]
    ratios = [_tagged_ratio(ex.words, p) for ex, p in zip(dataset, preds)]
    base = macro_scores(preds, golds, synonyms)
    slices = {}
    long_idx = [i for i, ex in enumerate(dataset) if len(ex.words) >= long_threshold]
    if long_idx:
        s = macro_scores([preds[i] for i in long_idx], [golds[i] for i in long_idx], synonyms)
        s["n_examples"] = len(long_idx)
        s["tagged_ratio"] = float(np.mean([ratios[i] for i in long_idx]))
        s["min_words"] = long_threshold
        slices["long_names"] = s
    return MetricsReport(
        n_examples=len(dataset),
        tagged_ratio=float(np.mean(ratios)),
        malformed=int(sum(malformed)) if malformed is not None else 0,
        slices=slices,
        **base,
    )
