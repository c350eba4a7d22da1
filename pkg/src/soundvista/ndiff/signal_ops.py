"""FFT-backed differentiable signal ops: framing, STFT, inverse STFT.

Forward passes reuse the numeric transforms from `soundvista.dsp`; backward
passes apply the exact adjoint of each linear map (windowed one-sided DFT,
overlap-add, reflect padding), so gradients are analytic rather than
materialized DFT matrices.
"""

from __future__ import annotations

import numpy as np

from ..dsp import Spectrogram, StftConfig, hann_window
from .tensor import Tensor, _as_tensor, _make


def frame_signal(x, frame: int, hop: int) -> Tensor:
    """Unfold (..., T) into (..., F, frame) with F = 1 + (T - frame) // hop."""
    x = _as_tensor(x)
    t = x.shape[-1]
    if t < frame:
        raise ValueError(f"signal shorter than frame: {t} < {frame}")
    count = 1 + (t - frame) // hop
    starts = [i * hop for i in range(count)]
    data = np.stack([x.data[..., s : s + frame] for s in starts], axis=-2)

    def backward(g):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        for i, s in enumerate(starts):
            gx[..., s : s + frame] += g[..., i, :]
        x.accumulate_grad(gx)

    return _make(data, (x,), "frame", backward)


def _reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="reflect")


def _reflect_fold(gpad: np.ndarray, pad: int, t: int) -> np.ndarray:
    out = gpad[..., pad : pad + t].copy()
    if pad > 0:
        out[..., 1 : pad + 1] += gpad[..., :pad][..., ::-1]
        out[..., t - pad - 1 : t - 1] += gpad[..., t + pad :][..., ::-1]
    return out


def stft_op(x, cfg: StftConfig) -> Tensor:
    """Differentiable STFT: (..., T) -> (..., 2, bins, frames) real/imag planes."""
    x = _as_tensor(x)
    lead = x.shape[:-1]
    t = x.shape[-1]
    pad = cfg.win_length // 2 if cfg.centered else 0
    frames = cfg.frames_for(t)
    window = hann_window(cfg.win_length)
    xp = _reflect_pad(x.data, pad) if cfg.centered else x.data
    starts = [i * cfg.hop for i in range(frames)]
    segs = np.stack([xp[..., s : s + cfg.win_length] for s in starts], axis=-2)
    spec = np.fft.rfft(segs * window, n=cfg.fft_size, axis=-1)  # (..., F, bins)
    planes = np.stack([spec.real, spec.imag], axis=-3)  # (..., 2, F, bins)
    data = np.swapaxes(planes, -1, -2).astype(x.dtype, copy=False)  # (..., 2, bins, F)

    def backward(g):
        if not x.requires_grad:
            return
        g = np.swapaxes(g.astype(np.float64), -1, -2)  # (..., 2, F, bins)
        gc = g[..., 0, :, :] + 1j * g[..., 1, :, :]
        gfull = np.zeros(lead + (frames, cfg.fft_size), dtype=np.complex128)
        gfull[..., : cfg.bins] = gc
        gt = np.fft.ifft(gfull, axis=-1).real * cfg.fft_size
        gt = gt[..., : cfg.win_length] * window
        gpad = np.zeros(lead + (t + 2 * pad,))
        for i, s in enumerate(starts):
            gpad[..., s : s + cfg.win_length] += gt[..., i, :]
        gx = _reflect_fold(gpad, pad, t) if cfg.centered else gpad
        x.accumulate_grad(gx.astype(x.dtype, copy=False))

    return _make(data, (x,), "stft", backward)


def istft_op(spec, cfg: StftConfig, out_len: int) -> Tensor:
    """Differentiable inverse STFT: (..., 2, bins, frames) planes -> (..., out_len)."""
    spec = _as_tensor(spec)
    if spec.shape[-3] != 2 or spec.shape[-2] != cfg.bins:
        raise ValueError(f"expected (..., 2, {cfg.bins}, frames), got {spec.shape}")
    lead = spec.shape[:-3]
    frames = spec.shape[-1]
    flat = spec.data.reshape((-1,) + spec.shape[-3:])
    cplx = flat[:, 0].astype(np.float64) + 1j * flat[:, 1].astype(np.float64)
    out = _numeric_istft(cplx, cfg, out_len)
    data = out.reshape(lead + (out_len,)).astype(spec.dtype, copy=False)

    pad = cfg.win_length // 2 if cfg.centered else 0
    window = hann_window(cfg.win_length)
    total = (frames - 1) * cfg.hop + cfg.win_length
    norm = np.zeros(total)
    w2 = window * window
    for i in range(frames):
        norm[i * cfg.hop : i * cfg.hop + cfg.win_length] += w2
    core = norm[pad : pad + out_len]

    def backward(g):
        if not spec.requires_grad:
            return
        g = g.astype(np.float64).reshape((-1, out_len))
        gola = np.zeros((g.shape[0], total))
        gola[:, pad : pad + out_len] = g / core
        segs = np.stack(
            [gola[:, i * cfg.hop : i * cfg.hop + cfg.win_length] for i in range(frames)],
            axis=1,
        )
        segs = segs * window
        r = np.fft.rfft(segs, n=cfg.fft_size, axis=-1)  # (K, F, bins)
        c = np.full(cfg.bins, 2.0)
        c[0] = 1.0
        if cfg.fft_size % 2 == 0:
            c[-1] = 1.0
        dre = (c / cfg.fft_size) * r.real
        dim = (c / cfg.fft_size) * r.imag
        dim[..., 0] = 0.0
        if cfg.fft_size % 2 == 0:
            dim[..., -1] = 0.0
        gplanes = np.stack([dre, dim], axis=1)  # (K, 2, F, bins)
        gplanes = np.swapaxes(gplanes, -1, -2).reshape(spec.shape)
        spec.accumulate_grad(gplanes.astype(spec.dtype, copy=False))

    return _make(data, (spec,), "istft", backward)


def _numeric_istft(cplx: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    from .. import dsp

    return dsp.istft(Spectrogram(data=cplx, config=cfg), out_len)
