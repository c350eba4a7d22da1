"""Time-frequency transforms, RT60 estimation, evaluation metrics, loudness maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import BinauralAudio, ImpulseResponse, WalkableGrid

LOUDNESS_FLOOR_DB = -120.0
ENV_FRAME = 400
ENV_HOP = 160
LRE_FLOOR = 1e-10


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 510
    win_length: int = 510
    hop: int = 128
    window: str = "hann"
    centered: bool = True

    def __post_init__(self):
        if self.win_length > self.fft_size:
            raise ValueError("win_length must be <= fft_size")
        if self.hop > self.win_length:
            raise ValueError("hop must be <= win_length")
        if self.window != "hann":
            raise ValueError(f"unsupported window: {self.window}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    def frames_for(self, n_samples: int) -> int:
        return 1 + n_samples // self.hop


@dataclass
class Spectrogram:
    data: np.ndarray  # (channels, bins, frames) complex
    config: StftConfig

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError(f"spectrogram must be (channels, bins, frames), got {self.data.shape}")
        if self.data.shape[1] != self.config.bins:
            raise ValueError(
                f"bin count {self.data.shape[1]} != fft_size/2+1 = {self.config.bins}"
            )


@dataclass
class MetricsReport:
    stft: float
    mag: float
    env: float
    lre: float

    def to_dict(self) -> dict:
        return {"stft": self.stft, "mag": self.mag, "env": self.env, "lre": self.lre}

    def as_array(self) -> np.ndarray:
        return np.array([self.stft, self.mag, self.env, self.lre])


@dataclass
class Rt60Value:
    seconds: float

    def __post_init__(self):
        if not np.isfinite(self.seconds) or self.seconds <= 0:
            raise ValueError(f"RT60 must be positive and finite, got {self.seconds}")


@dataclass
class LoudnessMap:
    locations: np.ndarray  # (n, 3)
    db: np.ndarray  # (n,)
    meta: dict = field(default_factory=dict)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann; satisfies overlap-add for hop <= n/2."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


# STFT / ISTFT -------------------------------------------------------------------

def stft(wave: np.ndarray, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Centered, Hann-windowed, one-sided STFT. Input (T,) or (channels, T)."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim == 1:
        wave = wave[None, :]
    if wave.shape[-1] < 1:
        raise ValueError("empty waveform")
    if not np.all(np.isfinite(wave)):
        raise ValueError("non-finite waveform")
    n = wave.shape[-1]
    pad = cfg.win_length // 2
    if cfg.centered:
        wave = np.pad(wave, ((0, 0), (pad, pad)), mode="reflect")
    frames = cfg.frames_for(n)
    window = hann_window(cfg.win_length)
    starts = np.arange(frames) * cfg.hop
    segs = np.stack([wave[:, s : s + cfg.win_length] for s in starts], axis=1)  # (C, F, win)
    spec = np.fft.rfft(segs * window, n=cfg.fft_size, axis=-1)
    return Spectrogram(data=spec.transpose(0, 2, 1), config=cfg)


def istft(spec: Spectrogram, out_len: int) -> np.ndarray:
    """Overlap-add inverse with squared-window normalization; output (channels, out_len)."""
    cfg = spec.config
    x = spec.data.transpose(0, 2, 1)  # (C, F, bins)
    frames = x.shape[1]
    segs = np.fft.irfft(x, n=cfg.fft_size, axis=-1)[..., : cfg.win_length]
    window = hann_window(cfg.win_length)
    segs = segs * window
    total = (frames - 1) * cfg.hop + cfg.win_length
    y = np.zeros((x.shape[0], total))
    norm = np.zeros(total)
    w2 = window * window
    for t in range(frames):
        s = t * cfg.hop
        y[:, s : s + cfg.win_length] += segs[:, t]
        norm[s : s + cfg.win_length] += w2
    pad = cfg.win_length // 2 if cfg.centered else 0
    if pad + out_len > total:
        raise ValueError(f"out_len {out_len} exceeds synthesized span {total - pad}")
    core = norm[pad : pad + out_len]
    if np.min(core) < 1e-8:
        raise ValueError("degenerate hop: window power does not cover the signal")
    return y[:, pad : pad + out_len] / core


# chunking -----------------------------------------------------------------------

@dataclass
class StitchPlan:
    chunk_len: int
    overlap: int
    total_len: int
    starts: list[int]


def chunk_signal(wave: np.ndarray, chunk_len: int, overlap: int = 512):
    """Split (channels, T) into fixed-length chunks; last chunk zero-padded."""
    wave = np.asarray(wave)
    if wave.ndim == 1:
        wave = wave[None, :]
    if overlap >= chunk_len:
        raise ValueError("overlap must be smaller than chunk_len")
    step = chunk_len - overlap
    t = wave.shape[-1]
    starts = [0]
    while starts[-1] + chunk_len < t:
        starts.append(starts[-1] + step)
    chunks = []
    for s in starts:
        c = wave[:, s : s + chunk_len]
        if c.shape[-1] < chunk_len:
            c = np.pad(c, ((0, 0), (0, chunk_len - c.shape[-1])))
        chunks.append(c)
    return chunks, StitchPlan(chunk_len=chunk_len, overlap=overlap, total_len=t, starts=starts)


def stitch_chunks(chunks: list[np.ndarray], plan: StitchPlan) -> np.ndarray:
    """Linear-crossfade reassembly; exact for matching chunk overlaps."""
    if len(chunks) != len(plan.starts):
        raise ValueError("chunk count does not match plan")
    channels = chunks[0].shape[0]
    out = np.zeros((channels, plan.starts[-1] + plan.chunk_len))
    weight = np.zeros(out.shape[-1])
    ramp = np.ones(plan.chunk_len)
    if plan.overlap > 0:
        fade = np.linspace(0.0, 1.0, plan.overlap + 2)[1:-1]
        head = fade
        tail = fade[::-1]
    for i, (c, s) in enumerate(zip(chunks, plan.starts)):
        w = ramp.copy()
        if plan.overlap > 0:
            if i > 0:
                w[: plan.overlap] = head
            if i < len(chunks) - 1:
                w[-plan.overlap :] = tail
        out[:, s : s + plan.chunk_len] += c * w
        weight[s : s + plan.chunk_len] += w
    weight = np.maximum(weight, 1e-12)
    return (out / weight)[:, : plan.total_len]


# RT60 ------------------------------------------------------------------------------

def estimate_rt60(echo: ImpulseResponse | np.ndarray, sample_rate: int | None = None) -> Rt60Value:
    """Schroeder backward integration on W, line fit of the -5..-35 dB decay."""
    if isinstance(echo, ImpulseResponse):
        w = echo.channels[0]
        fs = echo.sample_rate
    else:
        w = np.asarray(echo, dtype=np.float64)
        if sample_rate is None:
            raise ValueError("sample_rate required for raw arrays")
        fs = sample_rate
    energy = w * w
    total = float(energy.sum())
    if total <= 0:
        raise ValueError("insufficient decay: W channel carries no energy")
    edc = np.cumsum(energy[::-1])[::-1] / total
    with np.errstate(divide="ignore"):
        edc_db = 10.0 * np.log10(np.maximum(edc, 1e-30))
    mask = (edc_db <= -5.0) & (edc_db >= -35.0)
    idx = np.nonzero(mask)[0]
    if len(idx) < 10:
        raise ValueError("insufficient decay: fewer than 10 frames between -5 and -35 dB")
    t = idx / fs
    y = edc_db[idx]
    slope, _ = np.polyfit(t, y, 1)
    if slope >= 0:
        raise ValueError("insufficient decay: non-decaying energy curve")
    return Rt60Value(seconds=float(60.0 / abs(slope)))


# metrics ------------------------------------------------------------------------------

def _frame_energies(x: np.ndarray, frame: int = ENV_FRAME, hop: int = ENV_HOP) -> np.ndarray:
    n = x.shape[-1]
    if n < frame:
        frame = n
    count = 1 + (n - frame) // hop
    starts = np.arange(count) * hop
    segs = np.stack([x[..., s : s + frame] for s in starts], axis=-2)
    return np.mean(segs * segs, axis=-1)


def compute_metrics(
    pred: BinauralAudio,
    gt: BinauralAudio,
    stft_config: StftConfig = StftConfig(),
) -> MetricsReport:
    """STFT / MAG / ENV / LRE between predicted and ground-truth binaural audio."""
    p = pred.stereo
    g = gt.stereo
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    sp = stft(p, stft_config).data
    sg = stft(g, stft_config).data

    stft_l1 = float(
        0.5 * (np.mean(np.abs(sp.real - sg.real)) + np.mean(np.abs(sp.imag - sg.imag)))
    )
    # per-frame L2 over bins of the magnitude difference, averaged over channels/frames
    mag = float(np.mean(np.linalg.norm(np.abs(sp) - np.abs(sg), axis=1)))

    ep = _frame_energies(p)
    eg = _frame_energies(g)
    env = float(np.mean(np.linalg.norm(np.sqrt(ep) - np.sqrt(eg), axis=-1)))

    ratio_p = 10.0 * np.log10(np.maximum(ep[0], LRE_FLOOR) / np.maximum(ep[1], LRE_FLOOR))
    ratio_g = 10.0 * np.log10(np.maximum(eg[0], LRE_FLOOR) / np.maximum(eg[1], LRE_FLOOR))
    lre = float(np.mean(np.abs(ratio_p - ratio_g)))
    return MetricsReport(stft=stft_l1, mag=mag, env=env, lre=lre)


# loudness map ---------------------------------------------------------------------------

def loudness_map(render_fn, grid: WalkableGrid, meta: dict | None = None) -> LoudnessMap:
    """RMS loudness (dB) of `render_fn(location)` audio at every grid location, yaw 0."""
    db = np.empty(len(grid))
    for i, loc in enumerate(grid.locations):
        audio = render_fn(loc)
        x = audio.stereo if isinstance(audio, BinauralAudio) else np.asarray(audio)
        rms = float(np.sqrt(np.mean(x * x)))
        db[i] = max(20.0 * np.log10(max(rms, 1e-12)), LOUDNESS_FLOOR_DB)
    return LoudnessMap(locations=grid.locations.copy(), db=db, meta=meta or {})
