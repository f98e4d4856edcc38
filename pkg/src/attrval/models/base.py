from __future__ import annotations

from pathlib import Path

import numpy as np

from ..numerics import Tensor, load_checkpoint, save_checkpoint
from ..text import Vocab
from .layers import ModelConfig

SEQ2SEQ_KINDS = ("genae", "genave", "rescorer")
TAGGER_KINDS = ("tocve", "tocave")
MODEL_KINDS = SEQ2SEQ_KINDS + TAGGER_KINDS


class IncompatibleCheckpoints(ValueError):
    pass


def pad_batch(seqs, pad_value=0, dtype=np.int64) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad a list of sequences; returns (array, pad_flags)."""
    t = max(len(s) for s in seqs)
    out = np.full((len(seqs), t), pad_value, dtype=dtype)
    pad = np.ones((len(seqs), t), dtype=bool)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
        pad[i, : len(s)] = False
    return out, pad


class BaseModel:
    kind = ""

    def __init__(self, config: ModelConfig, vocab: Vocab, params: dict[str, Tensor], extra: dict | None = None):
        if config.vocab_size != len(vocab):
            raise ValueError(f"config vocab_size={config.vocab_size} but vocab has {len(vocab)} tokens")
        self.config = config
        self.vocab = vocab
        self.params = params
        self.extra = dict(extra or {})

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {n: p.data for n, p in self.params.items()}

    def manifest_extra(self) -> dict:
        return {"vocab": self.vocab.tokens, **self.extra}

    def save(self, path) -> Path:
        return save_checkpoint(path, self.kind, self.config.to_json(), self.state_arrays(), self.manifest_extra())


def load_model(path) -> BaseModel:
    from .seq2seq import Seq2SeqModel
    from .tagger import TaggerModel

    manifest, arrays = load_checkpoint(path)
    kind = manifest["kind"]
    cfg = ModelConfig.from_json(manifest["config"])
    extra = dict(manifest.get("extra", {}))
    vocab = Vocab(extra.pop("vocab"))
    params = {n: Tensor(a.copy(), requires_grad=True, name=n) for n, a in arrays.items()}
    if kind in SEQ2SEQ_KINDS:
        return Seq2SeqModel(kind, cfg, vocab, params, extra)
    if kind in TAGGER_KINDS:
        return TaggerModel(kind, cfg, vocab, params, extra)
    raise ValueError(f"unknown model kind {kind!r} in {path}")


def check_compatible(*models: BaseModel) -> None:
    first = models[0]
    for m in models[1:]:
        if m.vocab != first.vocab:
            raise IncompatibleCheckpoints(f"vocabulary of {m.kind} checkpoint differs from {first.kind}")
