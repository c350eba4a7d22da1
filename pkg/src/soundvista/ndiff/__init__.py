"""Minimal reverse-mode autodiff on numpy arrays.

Covers exactly the op closure the learnable modules need: dense and
convolutional layers, attention, normalization, elementwise math, and
FFT-backed spectrogram transforms with analytic adjoints.
"""

from .tensor import (
    Tensor,
    Parameter,
    no_grad,
    is_grad_enabled,
    set_nan_check,
    add,
    mul,
    matmul,
    conv2d,
    conv2d_transpose,
    concat,
    softmax,
    relu,
    leaky_relu,
    layer_norm,
    mean,
    tsum,
    mse,
    l1,
    log,
    exp,
    tabs,
    sin,
    cos,
    sqrt,
    softplus,
    dropout,
    reshape,
    transpose,
)
from .signal_ops import frame_signal, stft_op, istft_op
from .optim import Adam, adam_step, lr_at_epoch
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor",
    "Parameter",
    "no_grad",
    "is_grad_enabled",
    "set_nan_check",
    "add",
    "mul",
    "matmul",
    "conv2d",
    "conv2d_transpose",
    "concat",
    "softmax",
    "relu",
    "leaky_relu",
    "layer_norm",
    "mean",
    "tsum",
    "mse",
    "l1",
    "log",
    "exp",
    "tabs",
    "sin",
    "cos",
    "sqrt",
    "softplus",
    "dropout",
    "reshape",
    "transpose",
    "frame_signal",
    "stft_op",
    "istft_op",
    "Adam",
    "adam_step",
    "lr_at_epoch",
    "save_checkpoint",
    "load_checkpoint",
]
