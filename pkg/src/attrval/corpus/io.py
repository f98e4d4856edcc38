from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from ..types import AVPair, DataError, ProductExample


def example_to_json(ex: ProductExample) -> dict:
    rec = {
        "name": ex.name,
        "category": ex.category,
        "observed_pairs": [p.to_json() for p in ex.observed_pairs],
    }
    if ex.full_pairs is not None:
        rec["full_pairs"] = [p.to_json() for p in ex.full_pairs]
    return rec


def example_from_json(rec: dict) -> ProductExample:
    words = rec["name"].split()
    full = rec.get("full_pairs")
    return ProductExample(
        tuple(words),
        tuple(AVPair.from_json(p) for p in rec.get("observed_pairs", [])),
        None if full is None else tuple(AVPair.from_json(p) for p in full),
        rec.get("category", ""),
    ).validate()


def save_jsonl(dataset: Iterable[ProductExample], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ex in dataset:
            f.write(json.dumps(example_to_json(ex), ensure_ascii=False) + "\n")
    return path


def load_jsonl(path) -> list[ProductExample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(example_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError, DataError) as e:
                raise DataError(f"{path}:{lineno}: malformed record ({e})") from e
    return out
