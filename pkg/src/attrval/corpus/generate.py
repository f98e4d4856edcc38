"""Synthetic catalogs with hidden full labels, and simulated partial labeling."""
from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from ..types import AVPair, DataError, ProductExample, covered_indices
from .grammar import CatalogGrammar

MIN_WORDS, MAX_WORDS = 2, 12


def _sample_name(cat, rng: random.Random, synonyms: bool):
    tpl = cat.templates[rng.randrange(len(cat.templates))]
    words: list[str] = []
    pairs: list[AVPair] = []
    for sym, p in tpl:
        if p < 1.0 and rng.random() >= p:
            continue
        kind, key = sym[0], sym[1:]
        if kind == "@":
            slot = cat.slots[key]
            value = slot.values[rng.randrange(len(slot.values))].split()
            start = len(words)
            words.extend(value)
            pairs.append(AVPair(slot.surface(synonyms), tuple(range(start, start + len(value)))))
        else:
            group = cat.fillers[key]
            words.extend(group[rng.randrange(len(group))].split())
    return words, pairs


def generate_catalog(grammar: CatalogGrammar, n: int, seed: int, synonyms: bool = True) -> list[ProductExample]:
    """Sample ``n`` product names; every example carries its full pair set."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not grammar.categories:
        raise ValueError("empty grammar")
    grammar.validate()
    rng = random.Random(seed)
    weights = list(grammar.weights) or [1.0] * len(grammar.categories)
    out = []
    while len(out) < n:
        cat = rng.choices(grammar.categories, weights=weights)[0]
        words, pairs = _sample_name(cat, rng, synonyms)
        if not MIN_WORDS <= len(words) <= MAX_WORDS:
            continue
        ex = ProductExample(tuple(words), tuple(pairs), tuple(pairs), cat.name)
        out.append(ex.validate(require_subset=True))
    return out


def _coverage(ex: ProductExample, pairs: Sequence[AVPair]) -> float:
    return len(covered_indices(pairs)) / len(ex.words)


def partial_labeling(dataset: Sequence[ProductExample], target: float, seed: int,
                     mode: str = "pair", tol: float = 1e-4,
                     max_attribute_drop: float = 0.9) -> list[ProductExample]:
    """Drop observed pairs until mean token coverage is close to ``target``.

    ``mode="pair"`` drops each pair independently with one shared probability;
    ``mode="attribute"`` scales that probability per attribute type so some
    attributes go missing far more often than others, capped at
    ``max_attribute_drop`` so every attribute keeps some labels. The probability
    is found by bisection over fixed uniforms, so coverage is monotone in it.
    """
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target coverage must be in (0, 1], got {target}")
    if mode not in ("pair", "attribute"):
        raise ValueError(f"unknown partial-labeling mode {mode!r}")
    rng = np.random.default_rng(seed)
    draws = []
    for ex in dataset:
        if ex.full_pairs is None:
            raise DataError("partial_labeling needs full_pairs on every example")
        draws.append(rng.random(len(ex.full_pairs)))
    scale = {}
    if mode == "attribute":
        attrs = sorted({p.attribute for ex in dataset for p in ex.full_pairs})
        scale = dict(zip(attrs, 2.0 * rng.random(len(attrs))))

    def thresholds(ex):
        return np.array([scale.get(p.attribute, 1.0) for p in ex.full_pairs])

    scales = [thresholds(ex) for ex in dataset]

    cap = max_attribute_drop if mode == "attribute" else 1.0

    def keep(drop_p: float):
        return [[p for p, u, s in zip(ex.full_pairs, d, sc) if u >= min(cap, drop_p * s)]
                for ex, d, sc in zip(dataset, draws, scales)]

    def coverage(drop_p: float) -> float:
        return float(np.mean([_coverage(ex, k) for ex, k in zip(dataset, keep(drop_p))]))

    lo, hi = 0.0, 1.0
    if coverage(0.0) <= target:
        hi = 0.0
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if coverage(mid) > target:
                lo = mid
            else:
                hi = mid
        # pick whichever bracket end lands closer
        if abs(coverage(lo) - target) < abs(coverage(hi) - target):
            hi = lo
    return [ex.with_observed(k) for ex, k in zip(dataset, keep(hi))]


def stats(dataset: Sequence[ProductExample], which: str = "observed") -> dict:
    if not dataset:
        raise DataError("empty dataset")

    def pairs_of(ex):
        return ex.observed_pairs if which == "observed" else (ex.full_pairs or ())

    ratios = [_coverage(ex, pairs_of(ex)) for ex in dataset]
    return {
        "n_examples": len(dataset),
        "tagged_ratio": float(np.mean(ratios)),
        "n_pairs": int(sum(len(pairs_of(ex)) for ex in dataset)),
        "n_attributes": len({p.attribute for ex in dataset for p in pairs_of(ex)}),
        "mean_length": float(np.mean([len(ex.words) for ex in dataset])),
        "std_length": float(np.std([len(ex.words) for ex in dataset])),
    }
