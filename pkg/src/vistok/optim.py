"""Adam optimizer with bias correction.

Defaults: lr 1e-3, betas (0.9, 0.999), eps 1e-8, weight decay 0. Epsilon is
added outside the sqrt, so the first step with fresh moments collapses to
delta = -lr * g / (|g| + eps) elementwise.
"""
from __future__ import annotations

import numpy as np

from .errors import VistokError
from .tensor import Tensor


class OptimizerState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float,
                 beta2: float, eps: float, weight_decay: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        for name, p in params.items():
            if not p.requires_grad:
                raise VistokError(f"optimizer given frozen parameter {name!r}")
        self.params = dict(params)
        self.state = OptimizerState(self.params, lr, beta1, beta2, eps, weight_decay)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def fill_missing_grads(self) -> None:
        """Treat parameters untouched by backward as having zero gradient."""
        for p in self.params.values():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)

    def step(self) -> None:
        s = self.state
        s.step_count += 1
        t = s.step_count
        bc1 = 1.0 - s.beta1**t
        bc2 = 1.0 - s.beta2**t
        for name, p in self.params.items():
            if p.grad is None:
                raise VistokError(f"adam step: missing gradient for parameter {name!r}")
            g = p.grad
            if s.weight_decay != 0.0:
                g = g + s.weight_decay * p.data
            m = s.m[name]
            v = s.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p.data -= (s.lr * mhat / (np.sqrt(vhat) + s.eps)).astype(p.data.dtype)
