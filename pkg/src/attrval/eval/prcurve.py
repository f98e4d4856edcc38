from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..types import AVPair, ProductExample
from .metrics import macro_scores


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


def pr_curve(scored: Sequence[Sequence[tuple[AVPair, float]]], dataset: Sequence[ProductExample],
             n_thresholds: int = 21, synonyms=None) -> list[PRPoint]:
    """Macro precision/recall keeping extractions with confidence >= t, t uniform in [0, 1]."""
    if n_thresholds < 2:
        raise ValueError("need at least 2 thresholds")
    golds = [ex.gold for ex in dataset]
    points = []
    for t in np.linspace(0.0, 1.0, n_thresholds):
        kept = [[p for p, c in ex_scored if c >= t] for ex_scored in scored]
        s = macro_scores(kept, golds, synonyms)
        points.append(PRPoint(float(t), s["precision"], s["recall"]))
    return points


def interpolated_precision(curve: Sequence[PRPoint], recall: float) -> float:
    """Best precision reachable at recall >= ``recall`` (0 when unreachable)."""
    ok = [pt.precision for pt in curve if pt.recall >= recall]
    return max(ok) if ok else 0.0


def dominance(curve_a: Sequence[PRPoint], curve_b: Sequence[PRPoint], n_levels: int = 50) -> float:
    """Fraction of recall levels (over the union of both recall ranges) where ``a`` is at least as precise."""
    lo = min(pt.recall for pt in list(curve_a) + list(curve_b))
    hi = max(pt.recall for pt in list(curve_a) + list(curve_b))
    levels = np.linspace(lo, hi, n_levels)
    wins = [interpolated_precision(curve_a, r) >= interpolated_precision(curve_b, r) for r in levels]
    return float(np.mean(wins))


def write_csv(curve: Sequence[PRPoint], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for pt in curve:
            w.writerow([f"{pt.threshold:.6f}", f"{pt.precision:.6f}", f"{pt.recall:.6f}"])
    return path
