"""Adam with bias correction and an exponentially decaying epoch schedule."""

from __future__ import annotations

import logging

import numpy as np

from .tensor import Parameter

log = logging.getLogger(__name__)


def lr_at_epoch(lr0: float, epoch: int, total_epochs: int, final_ratio: float = 0.1) -> float:
    """Exponential decay reaching `final_ratio * lr0` at the last epoch (1-indexed)."""
    if total_epochs <= 1:
        return lr0
    frac = (epoch - 1) / (total_epochs - 1)
    return lr0 * final_ratio**frac


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """One bias-corrected update, in place on (param, m, v); returns param."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


class Adam:
    """Holds per-parameter moments; lr is mutable for epoch schedules."""

    def __init__(
        self,
        params: list[Parameter],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        strict: bool = False,
    ):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.strict = strict
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                if self.strict:
                    raise FloatingPointError(f"non-finite gradient on {p.name}")
                log.warning("skipping non-finite gradient on %s", p.name)
                continue
            adam_step(
                p.data, p.grad, m, v, self.step_count, self.lr, self.beta1, self.beta2, self.eps
            )

    def set_epoch(self, epoch: int, total_epochs: int, lr0: float, final_ratio: float = 0.1):
        self.lr = lr_at_epoch(lr0, epoch, total_epochs, final_ratio)
        return self.lr
