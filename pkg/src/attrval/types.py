"""Core records shared by every stage: attribute-value pairs and product examples."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class AVPair:
    attribute: str
    value_indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.value_indices)
        object.__setattr__(self, "value_indices", idx)
        if not self.attribute or self.attribute != self.attribute.lower() or self.attribute != self.attribute.strip():
            raise DataError(f"attribute must be nonempty, trimmed and lowercase: {self.attribute!r}")
        if not idx:
            raise DataError(f"pair {self.attribute!r} has no value words")
        if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 0:
            raise DataError(f"value indices of {self.attribute!r} must be strictly increasing and >= 0: {idx}")

    @property
    def start(self) -> int:
        return self.value_indices[0]

    def value(self, words: Sequence[str]) -> str:
        return " ".join(words[i] for i in self.value_indices)

    def to_json(self) -> dict:
        return {"attribute": self.attribute, "value_indices": list(self.value_indices)}

    @classmethod
    def from_json(cls, d: dict) -> "AVPair":
        return cls(d["attribute"], tuple(d["value_indices"]))


def check_pairs(pairs: Iterable[AVPair], n_words: int, what: str = "pairs") -> None:
    claimed: set[int] = set()
    for p in pairs:
        if p.value_indices[-1] >= n_words:
            raise DataError(f"{what}: index {p.value_indices[-1]} out of range for {n_words} words")
        overlap = claimed.intersection(p.value_indices)
        if overlap:
            raise DataError(f"{what}: word(s) {sorted(overlap)} belong to more than one pair")
        claimed.update(p.value_indices)


@dataclass(frozen=True)
class ProductExample:
    words: tuple[str, ...]
    observed_pairs: tuple[AVPair, ...] = ()
    full_pairs: tuple[AVPair, ...] | None = None
    category: str = ""

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "observed_pairs", tuple(self.observed_pairs))
        if self.full_pairs is not None:
            object.__setattr__(self, "full_pairs", tuple(self.full_pairs))

    @property
    def name(self) -> str:
        return " ".join(self.words)

    @property
    def gold(self) -> tuple[AVPair, ...]:
        """Hidden full pairs when known, else the observed ones."""
        return self.full_pairs if self.full_pairs is not None else self.observed_pairs

    def validate(self, require_subset: bool = False) -> "ProductExample":
        if not self.words:
            raise DataError("empty product name")
        check_pairs(self.observed_pairs, len(self.words), "observed_pairs")
        if self.full_pairs is not None:
            check_pairs(self.full_pairs, len(self.words), "full_pairs")
            missing = set(self.observed_pairs) - set(self.full_pairs)
            # retagged data legitimately departs from the oracle
            if require_subset and missing:
                raise DataError(f"observed pairs not in full pairs: {sorted(p.attribute for p in missing)}")
        return self

    def with_observed(self, pairs: Iterable[AVPair]) -> "ProductExample":
        return ProductExample(self.words, tuple(pairs), self.full_pairs, self.category)


def covered_indices(pairs: Iterable[AVPair]) -> set[int]:
    out: set[int] = set()
    for p in pairs:
        out.update(p.value_indices)
    return out
