"""Central finite-difference verification of autodiff gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def finite_difference_check(
    build_loss,
    inputs: list[Tensor],
    h: float = 1e-5,
    rtol: float = 1e-3,
    atol: float = 1e-8,
) -> float:
    """Compare analytic gradients of `build_loss(*inputs)` against central differences.

    Inputs must be float64 tensors with requires_grad=True. Returns the worst
    relative error seen; raises AssertionError beyond tolerance.
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise ValueError("gradient checks require float64 inputs")
        t.grad = None
    loss = build_loss(*inputs)
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    worst = 0.0
    for ti, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = build_loss(*inputs).data.item()
            flat[i] = orig - h
            lm = build_loss(*inputs).data.item()
            flat[i] = orig
            num[i] = (lp - lm) / (2.0 * h)
        ana = analytic[ti].reshape(-1)
        denom = np.maximum(np.abs(num), np.abs(ana))
        err = np.abs(num - ana) / np.maximum(denom, atol / rtol)
        bad = err > rtol
        small = np.maximum(np.abs(num), np.abs(ana)) < atol
        bad &= ~small
        if np.any(bad):
            j = int(np.argmax(err * bad))
            raise AssertionError(
                f"gradient mismatch on input {ti} at flat index {j}: "
                f"analytic {ana[j]:.8g} vs numeric {num[j]:.8g} (rel err {err[j]:.3g})"
            )
        worst = max(worst, float(err.max()) if err.size else 0.0)
    return worst
