"""Transformer building blocks over the numerics core (pre-norm residual blocks)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor

NEG_INF = -1e9


@dataclass
class ModelConfig:
    d_model: int = 64
    n_heads: int = 2
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 128
    max_len: int = 64
    vocab_size: int = 0
    dropout: float = 0.1
    marker_enabled: bool = True
    # add the marker after the encoder's final layer norm (else just before it)
    marker_after_norm: bool = True
    # on the scale of the normalized states it is added to
    marker_init_std: float = 1.0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.max_len < 4:
            raise ValueError("max_len must be at least 4")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


class ParamInit:
    """Creates named float32 parameters from one seeded generator."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}

    def _add(self, name: str, arr: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(arr.astype(np.float32), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def normal(self, name, shape, std=0.02):
        return self._add(name, self.rng.normal(0.0, std, size=shape))

    def xavier(self, name, shape):
        bound = math.sqrt(6.0 / (shape[0] + shape[1]))
        return self._add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name, shape):
        return self._add(name, np.zeros(shape))

    def ones(self, name, shape):
        return self._add(name, np.ones(shape))

    def linear(self, prefix, d_in, d_out):
        self.xavier(prefix + ".w", (d_in, d_out))
        self.zeros(prefix + ".b", (d_out,))

    def norm(self, prefix, d):
        self.ones(prefix + ".g", (d,))
        self.zeros(prefix + ".b", (d,))

    def attention(self, prefix, d):
        for part in ("q", "k", "v", "o"):
            self.linear(f"{prefix}.{part}", d, d)

    def encoder_layer(self, prefix, cfg: ModelConfig):
        self.norm(prefix + ".ln1", cfg.d_model)
        self.attention(prefix + ".attn", cfg.d_model)
        self.norm(prefix + ".ln2", cfg.d_model)
        self.linear(prefix + ".ff1", cfg.d_model, cfg.d_ff)
        self.linear(prefix + ".ff2", cfg.d_ff, cfg.d_model)

    def decoder_layer(self, prefix, cfg: ModelConfig):
        self.norm(prefix + ".ln1", cfg.d_model)
        self.attention(prefix + ".self", cfg.d_model)
        self.norm(prefix + ".ln2", cfg.d_model)
        self.attention(prefix + ".cross", cfg.d_model)
        self.norm(prefix + ".ln3", cfg.d_model)
        self.linear(prefix + ".ff1", cfg.d_model, cfg.d_ff)
        self.linear(prefix + ".ff2", cfg.d_ff, cfg.d_model)


class Ctx:
    """Per-call forward context: parameters, dropout generator, train flag."""

    def __init__(self, params: dict[str, Tensor], cfg: ModelConfig, rng: np.random.Generator | None = None,
                 training: bool = False):
        self.p = params
        self.cfg = cfg
        self.rng = rng
        self.training = training and rng is not None

    def drop(self, x: Tensor) -> Tensor:
        return nx.dropout(x, self.cfg.dropout, self.rng, self.training)

    def lin(self, prefix: str, x: Tensor) -> Tensor:
        return nx.linear(x, self.p[prefix + ".w"], self.p[prefix + ".b"])

    def norm(self, prefix: str, x: Tensor) -> Tensor:
        return nx.layer_norm(x, self.p[prefix + ".g"], self.p[prefix + ".b"])


def padding_bias(pad: np.ndarray) -> np.ndarray:
    """(B, T) pad flags -> additive (B, 1, 1, T) attention bias."""
    return np.where(pad, NEG_INF, 0.0).astype(np.float32)[:, None, None, :]


def causal_bias(t: int) -> np.ndarray:
    return np.triu(np.full((t, t), NEG_INF, dtype=np.float32), k=1)[None, None]


def _split_heads(x: Tensor, h: int) -> Tensor:
    b, t, d = x.shape
    return nx.transpose(nx.reshape(x, (b, t, h, d // h)), (0, 2, 1, 3))


def attention(ctx: Ctx, prefix: str, xq: Tensor, xkv: Tensor, bias: np.ndarray) -> Tensor:
    h = ctx.cfg.n_heads
    b, tq, d = xq.shape
    q = _split_heads(ctx.lin(prefix + ".q", xq), h)
    k = _split_heads(ctx.lin(prefix + ".k", xkv), h)
    v = _split_heads(ctx.lin(prefix + ".v", xkv), h)
    scores = nx.matmul(q, nx.transpose(k, (0, 1, 3, 2)))
    scores = nx.add(nx.mul(scores, 1.0 / math.sqrt(d // h)), bias)
    weights = ctx.drop(nx.softmax(scores, axis=-1))
    out = nx.transpose(nx.matmul(weights, v), (0, 2, 1, 3))
    return ctx.lin(prefix + ".o", nx.reshape(out, (b, tq, d)))


def feed_forward(ctx: Ctx, prefix: str, x: Tensor) -> Tensor:
    return ctx.lin(prefix + ".ff2", ctx.drop(nx.gelu(ctx.lin(prefix + ".ff1", x))))


def encoder_layer(ctx: Ctx, prefix: str, x: Tensor, bias: np.ndarray) -> Tensor:
    hn = ctx.norm(prefix + ".ln1", x)
    x = nx.add(x, ctx.drop(attention(ctx, prefix + ".attn", hn, hn, bias)))
    x = nx.add(x, ctx.drop(feed_forward(ctx, prefix, ctx.norm(prefix + ".ln2", x))))
    return x


def decoder_layer(ctx: Ctx, prefix: str, y: Tensor, mem: Tensor, self_bias: np.ndarray,
                  cross_bias: np.ndarray) -> Tensor:
    hn = ctx.norm(prefix + ".ln1", y)
    y = nx.add(y, ctx.drop(attention(ctx, prefix + ".self", hn, hn, self_bias)))
    y = nx.add(y, ctx.drop(attention(ctx, prefix + ".cross", ctx.norm(prefix + ".ln2", y), mem, cross_bias)))
    y = nx.add(y, ctx.drop(feed_forward(ctx, prefix, ctx.norm(prefix + ".ln3", y))))
    return y


def embed(ctx: Ctx, ids: np.ndarray, table: str, pos_table: str) -> Tensor:
    t = ids.shape[1]
    if t > ctx.cfg.max_len:
        raise ValueError(f"sequence of length {t} exceeds max_len={ctx.cfg.max_len}")
    x = nx.add(nx.embedding(ctx.p[table], ids), nx.embedding(ctx.p[pos_table], np.arange(t)))
    return ctx.drop(x)


def encode(ctx: Ctx, ids: np.ndarray, pad: np.ndarray, marker: np.ndarray | None) -> Tensor:
    """Encoder stack; the marker vector is added to final states of flagged positions."""
    bias = padding_bias(pad)
    x = embed(ctx, ids, "tok_emb", "enc_pos")
    for i in range(ctx.cfg.n_encoder_layers):
        x = encoder_layer(ctx, f"enc.{i}", x, bias)
    if ctx.cfg.marker_enabled and not ctx.cfg.marker_after_norm:
        x = add_marker(ctx, x, marker)
    x = ctx.norm("enc.ln", x)
    if ctx.cfg.marker_enabled and ctx.cfg.marker_after_norm:
        x = add_marker(ctx, x, marker)
    return x


def add_marker(ctx: Ctx, x: Tensor, marker: np.ndarray | None) -> Tensor:
    if marker is None:
        marker = np.zeros(x.shape[:2], dtype=bool)
    if marker.shape != x.shape[:2]:
        raise ValueError(f"marker mask shape {marker.shape} does not match sequence shape {x.shape[:2]}")
    flags = Tensor(marker.astype(x.dtype)[..., None])
    # kept on the trace even when no flag is set, so the marker always gets a gradient
    return nx.add(x, nx.mul(flags, ctx.p["marker"]))
