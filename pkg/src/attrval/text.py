"""Word-level tokenization, vocabulary, marker masks and target-string formats."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .types import AVPair, DataError

PAD, UNK, BOS, EOS, SEP, PAIR_DELIM, AV_DELIM = "<pad>", "<unk>", "<bos>", "<eos>", "<sep>", ",", ":"
RESERVED = (PAD, UNK, BOS, EOS, SEP, PAIR_DELIM, AV_DELIM)

_TARGET_TOKEN = re.compile(r"[,:]|[^\s,:]+")


class Vocab:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise DataError("vocabulary must start with the reserved tokens in fixed order")
        if len(set(tokens)) != len(tokens):
            raise DataError("vocabulary contains duplicate tokens")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    pad_id, unk_id, bos_id, eos_id, sep_id, pair_id, av_id = range(7)

    @classmethod
    def build(cls, words: Iterable[str]) -> "Vocab":
        extra = sorted(set(words) - set(RESERVED))
        return cls(list(RESERVED) + extra)

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def __contains__(self, tok: str) -> bool:
        return tok in self.index

    def encode(self, toks: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk_id) for t in toks]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


@dataclass(frozen=True)
class TokenSeq:
    words: tuple[str, ...]
    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.words)


def split_words(raw: str) -> list[str]:
    words = raw.lower().split()
    if not words:
        raise DataError("empty product name")
    return words


def tokenize(raw: str, vocab: Vocab | None = None) -> TokenSeq:
    words = split_words(raw)
    ids = vocab.encode(words) if vocab is not None else [Vocab.unk_id] * len(words)
    return TokenSeq(tuple(words), tuple(ids))


# ---------------------------------------------------------------------------
# marker masks
# ---------------------------------------------------------------------------

def build_marker_mask(n_words: int, pairs: Iterable[AVPair]) -> np.ndarray:
    flags = np.zeros(n_words, dtype=bool)
    for p in pairs:
        if p.value_indices[-1] >= n_words:
            raise DataError(f"value index {p.value_indices[-1]} out of range for {n_words} words")
        flags[list(p.value_indices)] = True
    return flags


def all_true_mask(n_words: int) -> np.ndarray:
    return np.ones(n_words, dtype=bool)


# ---------------------------------------------------------------------------
# target strings
# ---------------------------------------------------------------------------

def _ordered(pairs: Iterable[AVPair]) -> list[AVPair]:
    # stable: duplicates and ties keep their given order
    return sorted(pairs, key=lambda p: p.start)


def build_genae_target(pairs: Iterable[AVPair]) -> str:
    return PAIR_DELIM.join(p.attribute for p in _ordered(pairs))


def build_genave_target(pairs: Iterable[AVPair], words: Sequence[str]) -> str:
    return PAIR_DELIM.join(f"{p.attribute}{AV_DELIM}{p.value(words)}" for p in _ordered(pairs))


def build_rescorer_target(attribute: str, value: str) -> str:
    return f"{attribute}{AV_DELIM} {value}"


def _norm(s: str) -> str:
    return " ".join(s.split())


def parse_genae_output(text: str) -> list[str]:
    return [a for a in (_norm(seg) for seg in text.split(PAIR_DELIM)) if a]


def parse_genave_output(text: str) -> tuple[list[tuple[str, str]], int]:
    """Lenient inverse of :func:`build_genave_target`.

    Returns the ``(attribute, value)`` candidates and the number of dropped
    segments (missing ``:`` or empty attribute).
    """
    out, malformed = [], 0
    if not text.strip():
        return out, 0
    for seg in text.split(PAIR_DELIM):
        if AV_DELIM not in seg:
            malformed += 1
            continue
        attr, value = seg.split(AV_DELIM, 1)
        attr = _norm(attr)
        if not attr:
            malformed += 1
            continue
        out.append((attr, _norm(value)))
    return out, malformed


def target_tokens(text: str) -> list[str]:
    """Split a target string into tokens, delimiters standing alone."""
    return _TARGET_TOKEN.findall(text.lower())


def detokenize(tokens: Iterable[str]) -> str:
    parts: list[str] = []
    prev_word = False
    for t in tokens:
        if t in (PAIR_DELIM, AV_DELIM):
            parts.append(t)
            prev_word = False
        else:
            if prev_word:
                parts.append(" ")
            parts.append(t)
            prev_word = True
    return "".join(parts)


def build_tocve_input(attribute: str, words: Sequence[str]) -> tuple[list[str], int]:
    """Return ``attribute <sep> words`` as tokens and the index of the first name word."""
    attr = attribute.lower().split()
    if not attr:
        raise DataError("empty attribute")
    toks = attr + [SEP] + list(words)
    return toks, len(attr) + 1
