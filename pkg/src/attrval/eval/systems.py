"""Extraction systems assembled from checkpoints, with a common predict interface."""
from __future__ import annotations

from typing import Sequence

from ..models import (
    BaseModel,
    check_compatible,
    genave_decode_batch,
    load_model,
    tocave_predict_batch,
)
from ..pipeline import gentoc_infer_batch
from ..types import AVPair, DataError, ProductExample
from .metrics import LONG_NAME_WORDS, MetricsReport, score_predictions


class System:
    name = ""

    def predict(self, names: Sequence[Sequence[str]]) -> tuple[list[list[AVPair]], list[int]]:
        raise NotImplementedError


class GenToCSystem(System):
    name = "gentoc"

    def __init__(self, genae, tocve):
        check_compatible(genae, tocve)
        self.genae, self.tocve = genae, tocve

    def predict(self, names):
        preds = gentoc_infer_batch(names, self.genae, self.tocve)
        return preds, [0] * len(preds)


class GenAVESystem(System):
    name = "genave"

    def __init__(self, model):
        self.model = model

    def predict(self, names):
        out = genave_decode_batch(self.model, names)
        return [p for p, _ in out], [m for _, m in out]


class ToCAVESystem(System):
    name = "tocave"

    def __init__(self, model):
        self.model = model

    def predict(self, names):
        preds = tocave_predict_batch(self.model, names)
        return preds, [0] * len(preds)


def build_system(models: Sequence[BaseModel]) -> System:
    kinds = {m.kind: m for m in models if m.kind != "rescorer"}
    if set(kinds) == {"genae", "tocve"}:
        return GenToCSystem(kinds["genae"], kinds["tocve"])
    if set(kinds) == {"genave"}:
        return GenAVESystem(kinds["genave"])
    if set(kinds) == {"tocave"}:
        return ToCAVESystem(kinds["tocave"])
    raise ValueError(f"cannot assemble a system from checkpoint kinds {sorted(kinds)}")


def load_system(paths: Sequence) -> System:
    return build_system([load_model(p) for p in paths])


def predict_in_chunks(system: System, names, chunk: int = 512):
    preds, malformed = [], []
    for s in range(0, len(names), chunk):
        p, m = system.predict(names[s:s + chunk])
        preds.extend(p)
        malformed.extend(m)
    return preds, malformed


def evaluate(system: System, dataset: Sequence[ProductExample], long_threshold: int = LONG_NAME_WORDS,
             synonyms=None) -> MetricsReport:
    if not dataset:
        raise DataError("empty dataset")
    preds, malformed = predict_in_chunks(system, [ex.words for ex in dataset])
    return score_predictions(dataset, preds, malformed, long_threshold, synonyms)
