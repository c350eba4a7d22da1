"""Visual-acoustic binding: embed ray scans so they predict reverberation time.

The encoder splits a 360-degree scan into four azimuth sectors, runs one
sub-encoder per sector, and concatenates the four sub-embeddings. Pretraining
supervises a small head on RT60 with an L1 loss; the trained embedding is what
the reference sampler and the integration transformer consume.
"""

from __future__ import annotations

import numpy as np

from . import ndiff
from .base import EstimatorMixin
from .dsp import Rt60Value, estimate_rt60
from .ndiff import Parameter, Tensor
from .scenes import SceneSpec
from .features import encode_location
from .sim import VisualCapture, WalkableGrid, capture_visual, echo_response
from .validation import check_is_fitted

N_SECTORS = 4
INPUT_MODES = ("depth+materials", "depth", "location")


def capture_features(cap: VisualCapture, n_materials: int, mode: str = "depth+materials") -> np.ndarray:
    """Flatten one capture into the encoder's input layout."""
    if mode == "location":
        return encode_location(cap.location, np.zeros(3), np.full(3, max(cap.max_range, 1e-9)))
    d = np.clip(cap.depths / max(cap.max_range, 1e-9), 0.0, 1.0)
    if mode == "depth":
        return d
    onehot = np.zeros((len(cap.materials), n_materials))
    ids = np.clip(cap.materials, 0, n_materials - 1)
    onehot[np.arange(len(ids)), ids] = 1.0
    return np.concatenate([d, onehot.reshape(-1)])


class VabEncoder(EstimatorMixin):
    """Sector-wise scan encoder with an RT60 head (softplus keeps it positive)."""

    def __init__(
        self,
        embed_dim: int = 64,
        n_rays: int = 64,
        n_materials: int = 8,
        hidden: int = 64,
        head_hidden: int = 64,
        input_mode: str = "depth+materials",
        lr: float = 1e-3,
        batch_size: int = 32,
        steps: int = 1500,
        validation_fraction: float = 0.15,
        seed: int = 0,
    ):
        if embed_dim % N_SECTORS:
            raise ValueError("embed_dim must be divisible by 4 (one slice per sector)")
        if n_rays % N_SECTORS:
            raise ValueError("n_rays must be divisible by 4")
        if input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}")
        self.embed_dim = embed_dim
        self.n_rays = n_rays
        self.n_materials = n_materials
        self.hidden = hidden
        self.head_hidden = head_hidden
        self.input_mode = input_mode
        self.lr = lr
        self.batch_size = batch_size
        self.steps = steps
        self.validation_fraction = validation_fraction
        self.seed = seed
        self.params_ = None
        self.history_ = None

    # parameters -----------------------------------------------------------------
    def _sector_in_dim(self) -> int:
        rays = self.n_rays // N_SECTORS
        if self.input_mode == "depth":
            return rays
        return rays * (1 + self.n_materials)

    def _init_params(self, rng: np.random.Generator, dtype=np.float32) -> dict:
        def dense(name, fan_in, fan_out, zero=False):
            scale = 0.0 if zero else np.sqrt(2.0 / fan_in)
            w = Parameter((rng.standard_normal((fan_in, fan_out)) * scale).astype(dtype), name=f"{name}_w")
            b = Parameter(np.zeros(fan_out, dtype), name=f"{name}_b")
            return w, b

        params: dict[str, Parameter] = {}
        if self.input_mode == "location":
            d_in = 60
            for tag, (w, b) in {
                "loc1": dense("loc1", d_in, self.hidden),
                "loc2": dense("loc2", self.hidden, self.embed_dim),
            }.items():
                params[f"{tag}_w"], params[f"{tag}_b"] = w, b
        else:
            d_in = self._sector_in_dim()
            sub_dim = self.embed_dim // N_SECTORS
            for s in range(N_SECTORS):
                for tag, (w, b) in {
                    f"sec{s}_1": dense(f"sec{s}_1", d_in, self.hidden),
                    f"sec{s}_2": dense(f"sec{s}_2", self.hidden, sub_dim),
                }.items():
                    params[f"{tag}_w"], params[f"{tag}_b"] = w, b
        w, b = dense("head1", self.embed_dim, self.head_hidden)
        params["head1_w"], params["head1_b"] = w, b
        w, b = dense("head2", self.head_hidden, 1, zero=True)  # softplus(0) at init
        params["head2_w"], params["head2_b"] = w, b
        return params

    # forward ---------------------------------------------------------------------
    def _embed(self, feats: Tensor, params: dict) -> Tensor:
        if self.input_mode == "location":
            h = ndiff.leaky_relu(ndiff.matmul(feats, params["loc1_w"]) + params["loc1_b"])
            return ndiff.matmul(h, params["loc2_w"]) + params["loc2_b"]
        d_in = self._sector_in_dim()
        outs = []
        for s in range(N_SECTORS):
            sector = feats[:, s * d_in : (s + 1) * d_in]
            h = ndiff.leaky_relu(ndiff.matmul(sector, params[f"sec{s}_1_w"]) + params[f"sec{s}_1_b"])
            outs.append(ndiff.matmul(h, params[f"sec{s}_2_w"]) + params[f"sec{s}_2_b"])
        return ndiff.concat(outs, axis=1)

    def _head(self, g: Tensor, params: dict) -> Tensor:
        h = ndiff.leaky_relu(ndiff.matmul(g, params["head1_w"]) + params["head1_b"])
        return ndiff.softplus(ndiff.matmul(h, params["head2_w"]) + params["head2_b"])

    def _features(self, captures: list[VisualCapture]) -> np.ndarray:
        feats = np.stack([capture_features(c, self.n_materials, self.input_mode) for c in captures])
        if self.input_mode != "location":
            # sector layout: [depths | one-hots] per sector, contiguous per sector
            rays = self.n_rays // N_SECTORS
            d = feats[:, : self.n_rays]
            if self.input_mode == "depth":
                feats = d.reshape(len(captures), N_SECTORS, rays).reshape(len(captures), -1)
            else:
                oh = feats[:, self.n_rays :].reshape(len(captures), self.n_rays, self.n_materials)
                per_sector = []
                for s in range(N_SECTORS):
                    sl = slice(s * rays, (s + 1) * rays)
                    per_sector.append(
                        np.concatenate([d[:, sl], oh[:, sl].reshape(len(captures), -1)], axis=1)
                    )
                feats = np.concatenate(per_sector, axis=1)
        return feats.astype(np.float32)

    # estimator API ------------------------------------------------------------------
    def fit(self, captures: list[VisualCapture], rt60s, sample_weight=None):
        """Pretrain on (capture, RT60) pairs with L1 loss; keeps best-validation params."""
        if len(captures) == 0:
            raise ValueError("empty dataset")
        y = np.asarray([v.seconds if isinstance(v, Rt60Value) else float(v) for v in rt60s])
        if len(y) != len(captures):
            raise ValueError("captures and targets must align")
        rng = np.random.default_rng(self.seed)
        self.params_ = self._init_params(rng)
        feats = self._features(captures)

        n = len(captures)
        order = rng.permutation(n)
        n_val = max(1, int(round(self.validation_fraction * n))) if n >= 8 else 0
        val_idx = order[:n_val]
        train_idx = order[n_val:] if n_val else order
        opt = ndiff.Adam(list(self.params_.values()), lr=self.lr)
        best = (np.inf, {k: p.data.copy() for k, p in self.params_.items()})
        history = []
        for step in range(self.steps):
            batch = rng.choice(train_idx, size=min(self.batch_size, len(train_idx)), replace=False)
            x = Tensor(feats[batch])
            target = Tensor(y[batch, None].astype(np.float32))
            pred = self._head(self._embed(x, self.params_), self.params_)
            loss = ndiff.l1(pred, target)
            opt.zero_grad()
            loss.backward()
            opt.step()
            if step % 50 == 0 or step == self.steps - 1:
                val = self._eval_l1(feats[val_idx], y[val_idx]) if n_val else loss.item()
                history.append({"step": step, "train_l1": loss.item(), "val_l1": val})
                if val < best[0]:
                    best = (val, {k: p.data.copy() for k, p in self.params_.items()})
        for k, p in self.params_.items():
            p.data = best[1][k]
        self.history_ = history
        return self

    def finetune(self, captures: list[VisualCapture], rt60s, steps: int = 300, lr: float | None = None):
        """Few-shot adaptation on sparse reference points of a new scene."""
        check_is_fitted(self, "params_")
        y = np.asarray([v.seconds if isinstance(v, Rt60Value) else float(v) for v in rt60s])
        feats = self._features(captures)
        rng = np.random.default_rng(self.seed + 1)
        opt = ndiff.Adam(list(self.params_.values()), lr=lr if lr is not None else self.lr * 0.3)
        for _ in range(steps):
            batch = rng.integers(0, len(captures), size=min(self.batch_size, len(captures)))
            pred = self._head(self._embed(Tensor(feats[batch]), self.params_), self.params_)
            loss = ndiff.l1(pred, Tensor(y[batch, None].astype(np.float32)))
            opt.zero_grad()
            loss.backward()
            opt.step()
        return self

    def _eval_l1(self, feats: np.ndarray, y: np.ndarray) -> float:
        with ndiff.no_grad():
            pred = self._head(self._embed(Tensor(feats), self.params_), self.params_)
        return float(np.mean(np.abs(pred.data[:, 0] - y)))

    def transform(self, captures: list[VisualCapture]) -> np.ndarray:
        """Embeddings g, shape (n, embed_dim)."""
        check_is_fitted(self, "params_")
        with ndiff.no_grad():
            g = self._embed(Tensor(self._features(captures)), self.params_)
        return g.data.astype(np.float64)

    def fit_transform(self, captures, rt60s):
        return self.fit(captures, rt60s).transform(captures)

    def predict(self, captures: list[VisualCapture]) -> np.ndarray:
        """RT60 predictions in seconds (always positive)."""
        check_is_fitted(self, "params_")
        with ndiff.no_grad():
            feats = Tensor(self._features(captures))
            pred = self._head(self._embed(feats, self.params_), self.params_)
        return pred.data[:, 0].astype(np.float64)

    def encode(self, capture: VisualCapture) -> np.ndarray:
        if self.input_mode != "location" and len(capture.depths) != self.n_rays:
            raise ValueError(f"capture has {len(capture.depths)} rays, encoder expects {self.n_rays}")
        return self.transform([capture])[0]

    def predict_rt60(self, capture: VisualCapture) -> Rt60Value:
        return Rt60Value(seconds=float(self.predict([capture])[0]))

    # persistence -----------------------------------------------------------------------
    def save(self, path_base: str) -> str:
        check_is_fitted(self, "params_")
        arrays = {k: p.data for k, p in self.params_.items()}
        return ndiff.save_checkpoint(path_base, {"vab": arrays}, tag="vab-v1", extra=self.get_params())

    @classmethod
    def load(cls, path_base: str) -> "VabEncoder":
        groups, manifest = ndiff.load_checkpoint(path_base)
        if manifest["tag"] != "vab-v1":
            raise ValueError(f"not a vab checkpoint: {manifest['tag']}")
        enc = cls(**manifest["extra"])
        enc.params_ = {k: Parameter(v, name=k) for k, v in groups["vab"].items()}
        return enc


def scene_rt60_dataset(
    scene: SceneSpec,
    grid: WalkableGrid,
    n_rays: int = 64,
    max_order: int = 40,
    rir_length_s: float = 1.0,
) -> tuple[list[VisualCapture], list[Rt60Value]]:
    """Paired (capture, RT60-from-echo) data over every walkable location."""
    captures, values = [], []
    for loc in grid.locations:
        captures.append(capture_visual(scene, loc, n_rays))
        echo = echo_response(scene, loc, max_order=max_order, rir_length_s=rir_length_s)
        values.append(estimate_rt60(echo))
    return captures, values
