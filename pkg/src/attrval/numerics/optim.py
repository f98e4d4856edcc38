"""Adaptive-moment-estimation optimizer over named parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class MissingGradientError(RuntimeError):
    pass


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 3e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8, clip_norm: float | None = None):
        self.params = params
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)
        self.clip_norm = clip_norm
        for name, p in params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2))
                                 for p in self.params.values() if p.grad is not None)))

    def step(self) -> None:
        missing = [n for n, p in self.params.items() if p.grad is None]
        if missing:
            raise MissingGradientError(f"no gradient for parameter(s): {', '.join(missing[:5])}")
        st = self.state
        st.step += 1
        scale = 1.0
        if self.clip_norm is not None:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / (norm + 1e-12)
        if st.lr == 0.0:
            self.zero_grad()
            return
        b1, b2 = st.beta1, st.beta2
        corr1 = 1.0 - b1 ** st.step
        corr2 = 1.0 - b2 ** st.step
        for name, p in self.params.items():
            g = p.grad * scale if scale != 1.0 else p.grad
            m, v = st.m[name], st.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (st.lr / corr1) * m / (np.sqrt(v / corr2) + st.eps)
            p.data -= update.astype(p.data.dtype, copy=False)
            p.grad = None
