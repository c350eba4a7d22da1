"""Seeded ambient source signals: harmonic drones, band noise, pulsing noise."""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

_KINDS = ("harmonic", "noise_band", "am_noise")


def ambient_source_signal(
    rng: np.random.Generator,
    sample_rate: int,
    duration: float,
    kind: str | None = None,
    rms: float = 0.1,
) -> np.ndarray:
    """Synthesize one mono ambient texture, deterministic given the generator state."""
    if kind is None:
        kind = _KINDS[int(rng.integers(0, len(_KINDS)))]
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    if kind == "harmonic":
        f0 = float(rng.uniform(90.0, 420.0))
        n_harm = int(rng.integers(3, 7))
        vib = 1.0 + 0.003 * np.sin(2 * np.pi * rng.uniform(0.2, 1.5) * t + rng.uniform(0, 2 * np.pi))
        x = np.zeros(n)
        for h in range(1, n_harm + 1):
            amp = 1.0 / h ** rng.uniform(0.8, 1.6)
            x += amp * np.sin(2 * np.pi * f0 * h * vib * t + rng.uniform(0, 2 * np.pi))
    elif kind == "noise_band":
        lo = float(rng.uniform(120.0, 800.0))
        hi = lo * float(rng.uniform(1.8, 4.0))
        hi = min(hi, 0.45 * sample_rate)
        b, a = sps.butter(2, [lo, hi], btype="bandpass", fs=sample_rate)
        x = sps.lfilter(b, a, rng.standard_normal(n))
    elif kind == "am_noise":
        env = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.3, 2.0) * t + rng.uniform(0, 2 * np.pi))
        b, a = sps.butter(2, rng.uniform(0.1, 0.35), btype="lowpass")
        x = env * sps.lfilter(b, a, rng.standard_normal(n))
    else:
        raise ValueError(f"unknown signal kind: {kind}")

    x = np.asarray(x, dtype=np.float64)
    scale = rms / max(float(np.sqrt(np.mean(x * x))), 1e-12)
    return x * scale
