"""Deterministic geometric feature encodings shared across modules."""

from __future__ import annotations

import numpy as np

N_FREQUENCIES = 10


def sinusoid_features(values: np.ndarray, n_freq: int = N_FREQUENCIES) -> np.ndarray:
    """[sin(2^k pi v), cos(2^k pi v)] for k = 0..n_freq-1, flattened per value."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    freqs = (2.0 ** np.arange(n_freq)) * np.pi
    angles = values[..., None] * freqs  # (..., n, k)
    enc = np.stack([np.sin(angles), np.cos(angles)], axis=-1)  # (..., n, k, 2)
    return enc.reshape(values.shape[:-1] + (values.shape[-1] * n_freq * 2,))


def encode_location(loc, bounds_lo, bounds_hi, n_freq: int = N_FREQUENCIES) -> np.ndarray:
    """Sinusoidal encoding of a 3-vector normalized to [0, 1] by scene bounds."""
    loc = np.asarray(loc, dtype=np.float64)
    lo = np.asarray(bounds_lo, dtype=np.float64)
    hi = np.asarray(bounds_hi, dtype=np.float64)
    span = np.where(hi - lo > 1e-12, hi - lo, 1.0)
    norm = (loc - lo) / span
    return sinusoid_features(norm, n_freq)


def yaw_pitch_to_quaternion(yaw: float, pitch: float) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a yaw-then-pitch head rotation."""
    cy, sy = np.cos(yaw / 2.0), np.sin(yaw / 2.0)
    cp, sp = np.cos(pitch / 2.0), np.sin(pitch / 2.0)
    # yaw about z, pitch about the rotated y axis
    q = np.array(
        [
            cy * cp,
            -sy * sp,
            cy * sp,
            sy * cp,
        ]
    )
    return q / np.linalg.norm(q)


def quaternion_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quaternion_inverse(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]]) / float(np.dot(q, q))


def relative_quaternion(yaw_k: float, pitch_k: float, yaw_i: float, pitch_i: float) -> np.ndarray:
    """Orientation of pose k relative to pose i, as a unit quaternion."""
    qk = yaw_pitch_to_quaternion(yaw_k, pitch_k)
    qi = yaw_pitch_to_quaternion(yaw_i, pitch_i)
    q = quaternion_multiply(qk, quaternion_inverse(qi))
    return q / np.linalg.norm(q)
