"""Encoder-decoder models: attribute generator, pair generator and rescorer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from ..text import (
    BOS,
    EOS,
    Vocab,
    all_true_mask,
    detokenize,
    parse_genae_output,
    parse_genave_output,
    target_tokens,
)
from ..types import AVPair
from .base import SEQ2SEQ_KINDS, BaseModel, pad_batch
from .layers import Ctx, ModelConfig, ParamInit, causal_bias, decoder_layer, embed, encode, feed_forward, padding_bias


@dataclass
class Seq2SeqRecord:
    src: list[int]
    tgt: list[int]                     # without <bos>/<eos>
    marker: np.ndarray | None = None


@dataclass
class Seq2SeqBatch:
    src: np.ndarray
    src_pad: np.ndarray
    marker: np.ndarray | None
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_w: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        self.n = self.src.shape[0]


class Seq2SeqModel(BaseModel):
    def __init__(self, kind: str, config: ModelConfig, vocab: Vocab, params, extra=None):
        if kind not in SEQ2SEQ_KINDS:
            raise ValueError(f"not a seq2seq kind: {kind}")
        self.kind = kind
        super().__init__(config, vocab, params, extra)

    @classmethod
    def create(cls, kind: str, config: ModelConfig, vocab: Vocab, seed: int, extra=None) -> "Seq2SeqModel":
        if kind == "rescorer":
            config.marker_enabled = False
        config.vocab_size = len(vocab)
        init = ParamInit(seed)
        d = config.d_model
        init.normal("tok_emb", (len(vocab), d))
        init.normal("enc_pos", (config.max_len, d))
        init.normal("dec_pos", (config.max_len, d))
        for i in range(config.n_encoder_layers):
            init.encoder_layer(f"enc.{i}", config)
        init.norm("enc.ln", d)
        for i in range(config.n_decoder_layers):
            init.decoder_layer(f"dec.{i}", config)
        init.norm("dec.ln", d)
        init.linear("out", d, len(vocab))
        if config.marker_enabled:
            init.normal("marker", (d,), std=config.marker_init_std)
        return cls(kind, config, vocab, init.params, extra)

    # -- data -------------------------------------------------------------

    def encode_target(self, text: str) -> list[int]:
        ids = self.vocab.encode(target_tokens(text))
        if len(ids) + 1 > self.config.max_len:
            raise ValueError(f"target of {len(ids)} tokens exceeds max_len={self.config.max_len}")
        return ids

    def collate(self, records: Sequence[Seq2SeqRecord]) -> Seq2SeqBatch:
        v = self.vocab
        src, src_pad = pad_batch([r.src for r in records], v.pad_id)
        marker = None
        if self.config.marker_enabled:
            marker = np.zeros(src.shape, dtype=bool)
            for i, r in enumerate(records):
                if r.marker is not None:
                    if len(r.marker) != len(r.src):
                        raise ValueError("marker mask length differs from source length")
                    marker[i, : len(r.src)] = r.marker
        tgt_in, _ = pad_batch([[v.bos_id] + r.tgt for r in records], v.pad_id)
        tgt_out, out_pad = pad_batch([r.tgt + [v.eos_id] for r in records], v.pad_id)
        return Seq2SeqBatch(src, src_pad, marker, tgt_in, tgt_out, (~out_pad).astype(np.float32))

    # -- forward ----------------------------------------------------------

    def encode(self, ctx: Ctx, src, src_pad, marker) -> Tensor:
        return encode(ctx, src, src_pad, marker)

    def decode_logits(self, ctx: Ctx, mem: Tensor, src_pad: np.ndarray, tgt_in: np.ndarray) -> Tensor:
        t = tgt_in.shape[1]
        tgt_pad = tgt_in == self.vocab.pad_id
        tgt_pad[:, 0] = False
        self_bias = causal_bias(t) + padding_bias(tgt_pad)
        cross_bias = padding_bias(src_pad)
        y = embed(ctx, tgt_in, "tok_emb", "dec_pos")
        for i in range(self.config.n_decoder_layers):
            y = decoder_layer(ctx, f"dec.{i}", y, mem, self_bias, cross_bias)
        y = ctx.norm("dec.ln", y)
        return ctx.lin("out", y)

    def loss(self, batch: Seq2SeqBatch, rng: np.random.Generator | None = None, training: bool = True) -> Tensor:
        ctx = Ctx(self.params, self.config, rng, training)
        mem = self.encode(ctx, batch.src, batch.src_pad, batch.marker)
        logits = self.decode_logits(ctx, mem, batch.src_pad, batch.tgt_in)
        v = logits.shape[-1]
        return nx.cross_entropy(nx.reshape(logits, (-1, v)), batch.tgt_out.reshape(-1), batch.tgt_w.reshape(-1))

    def token_logprobs(self, batch: Seq2SeqBatch) -> list[np.ndarray]:
        """Teacher-forced log-probabilities of each target token (incl. <eos>)."""
        with nx.no_grad():
            ctx = Ctx(self.params, self.config)
            mem = self.encode(ctx, batch.src, batch.src_pad, batch.marker)
            z = self.decode_logits(ctx, mem, batch.src_pad, batch.tgt_in).data.astype(np.float64)
        z = z - z.max(axis=-1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
        picked = np.take_along_axis(logp, batch.tgt_out[..., None], axis=-1)[..., 0]
        return [picked[i, batch.tgt_w[i] > 0] for i in range(batch.n)]

    def greedy(self, srcs: Sequence[Sequence[int]], markers: Sequence[np.ndarray] | None = None,
               max_steps: int | None = None) -> list[list[int]]:
        """Greedy decoding; stops at <eos> or the length limit."""
        v = self.vocab
        max_steps = min(max_steps or self.config.max_len - 1, self.config.max_len - 1)
        src, src_pad = pad_batch(list(srcs), v.pad_id)
        marker = None
        if self.config.marker_enabled:
            marker = np.zeros(src.shape, dtype=bool)
            for i, s in enumerate(srcs):
                marker[i, : len(s)] = markers[i] if markers is not None else False
        b = len(srcs)
        out = np.full((b, 1), v.bos_id, dtype=np.int64)
        done = np.zeros(b, dtype=bool)
        with nx.no_grad():
            ctx = Ctx(self.params, self.config)
            mem = self.encode(ctx, src, src_pad, marker)
            state = _DecoderCache(ctx, mem, src_pad)
            for step in range(max_steps):
                logits = state.step(out[:, -1], step)
                logits[:, v.pad_id] = -np.inf
                logits[:, v.bos_id] = -np.inf
                nxt = logits.argmax(axis=-1)
                nxt[done] = v.pad_id
                out = np.concatenate([out, nxt[:, None]], axis=1)
                done |= nxt == v.eos_id
                if done.all():
                    break
        result = []
        for row in out[:, 1:]:
            toks = []
            for t in row:
                if t in (v.eos_id, v.pad_id):
                    break
                toks.append(int(t))
            result.append(toks)
        return result

    def decode_strings(self, srcs, markers=None) -> list[str]:
        return [detokenize(self.vocab.decode(ids)) for ids in self.greedy(srcs, markers)]


class _DecoderCache:
    """One-token-at-a-time decoder with cached self-attention keys and values.

    Matches ``decode_logits`` on the last position when no earlier target
    position is padding, which holds for greedy decoding.
    """

    def __init__(self, ctx: Ctx, mem: Tensor, src_pad: np.ndarray):
        self.ctx = ctx
        cfg = ctx.cfg
        self.h = cfg.n_heads
        self.cross_bias = padding_bias(src_pad)
        self.cross_kv = [(self._heads(ctx.lin(f"dec.{i}.cross.k", mem)), self._heads(ctx.lin(f"dec.{i}.cross.v", mem)))
                         for i in range(cfg.n_decoder_layers)]
        self.self_kv: list[tuple[Tensor, Tensor] | None] = [None] * cfg.n_decoder_layers

    def _heads(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return nx.transpose(nx.reshape(x, (b, t, self.h, d // self.h)), (0, 2, 1, 3))

    def _attend(self, prefix: str, q_in: Tensor, k: Tensor, v: Tensor, bias) -> Tensor:
        b, _, d = q_in.shape
        q = self._heads(self.ctx.lin(prefix + ".q", q_in))
        scores = nx.mul(nx.matmul(q, nx.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(d // self.h))
        if bias is not None:
            scores = nx.add(scores, bias)
        out = nx.transpose(nx.matmul(nx.softmax(scores, axis=-1), v), (0, 2, 1, 3))
        return self.ctx.lin(prefix + ".o", nx.reshape(out, (b, 1, d)))

    def step(self, tokens: np.ndarray, pos: int) -> np.ndarray:
        ctx = self.ctx
        if pos >= ctx.cfg.max_len:
            raise ValueError(f"decoding position {pos} exceeds max_len={ctx.cfg.max_len}")
        y = nx.add(nx.embedding(ctx.p["tok_emb"], tokens[:, None]), nx.embedding(ctx.p["dec_pos"], np.array([pos])))
        for i in range(ctx.cfg.n_decoder_layers):
            pre = f"dec.{i}"
            hn = ctx.norm(pre + ".ln1", y)
            k, v = self._heads(ctx.lin(pre + ".self.k", hn)), self._heads(ctx.lin(pre + ".self.v", hn))
            if self.self_kv[i] is not None:
                pk, pv = self.self_kv[i]
                k = Tensor(np.concatenate([pk.data, k.data], axis=2))
                v = Tensor(np.concatenate([pv.data, v.data], axis=2))
            self.self_kv[i] = (k, v)
            y = nx.add(y, self._attend(pre + ".self", hn, k, v, None))
            ck, cv = self.cross_kv[i]
            y = nx.add(y, self._attend(pre + ".cross", ctx.norm(pre + ".ln2", y), ck, cv, self.cross_bias))
            y = nx.add(y, feed_forward(ctx, pre, ctx.norm(pre + ".ln3", y)))
        return ctx.lin("out", ctx.norm("dec.ln", y)).data[:, -1, :].copy()


# ---------------------------------------------------------------------------
# stage operations
# ---------------------------------------------------------------------------

def genae_encode(model: Seq2SeqModel, words: Sequence[str], mask: np.ndarray) -> np.ndarray:
    """Final encoder states (T, d) for one name, marker added where ``mask`` is set."""
    mask = np.asarray(mask, dtype=bool)
    if len(mask) != len(words):
        raise ValueError(f"mask length {len(mask)} differs from {len(words)} words")
    src = np.array([model.vocab.encode(words)])
    with nx.no_grad():
        ctx = Ctx(model.params, model.config)
        return model.encode(ctx, src, np.zeros(src.shape, dtype=bool), mask[None]).data[0]


def genae_loss(model: Seq2SeqModel, words: Sequence[str], mask: np.ndarray, target: str) -> Tensor:
    rec = Seq2SeqRecord(model.vocab.encode(words), model.encode_target(target), np.asarray(mask, dtype=bool))
    return model.loss(model.collate([rec]), training=False)


def genae_decode_batch(model: Seq2SeqModel, names: Sequence[Sequence[str]]) -> list[list[str]]:
    srcs = [model.vocab.encode(w) for w in names]
    return [parse_genae_output(s) for s in model.decode_strings(srcs, [all_true_mask(len(w)) for w in names])]


def genae_decode(model: Seq2SeqModel, words: Sequence[str]) -> list[str]:
    return genae_decode_batch(model, [words])[0]


def ground_values(words: Sequence[str], candidates: Sequence[tuple[str, str]]) -> tuple[list[AVPair], int]:
    """Map generated value strings onto word spans, leftmost unused occurrence first."""
    used: set[int] = set()
    pairs, dropped = [], 0
    for attr, value in candidates:
        vw = value.split()
        span = None
        if vw:
            for s in range(len(words) - len(vw) + 1):
                idx = range(s, s + len(vw))
                if list(words[s: s + len(vw)]) == vw and not used.intersection(idx):
                    span = tuple(idx)
                    break
        if span is None:
            dropped += 1
            continue
        used.update(span)
        pairs.append(AVPair(attr, span))
    return pairs, dropped


def genave_decode_batch(model: Seq2SeqModel, names: Sequence[Sequence[str]]) -> list[tuple[list[AVPair], int]]:
    srcs = [model.vocab.encode(w) for w in names]
    markers = [all_true_mask(len(w)) for w in names] if model.config.marker_enabled else None
    out = []
    for words, s in zip(names, model.decode_strings(srcs, markers)):
        cands, malformed = parse_genave_output(s)
        pairs, dropped = ground_values(words, cands)
        out.append((pairs, malformed + dropped))
    return out


def genave_decode(model: Seq2SeqModel, words: Sequence[str]) -> tuple[list[AVPair], int]:
    return genave_decode_batch(model, [words])[0]
