"""Reference location sampling: cluster walkable points on embedding + location."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .base import EstimatorMixin
from .features import encode_location
from .scenes import Pose, SceneSpec
from .sim import WalkableGrid, capture_visual
from .validation import check_array, check_is_fitted

log = logging.getLogger(__name__)

STANDARD_DISTANCE_M = 8.0
MIN_GROUP_SIZE = 3


class KMeans(EstimatorMixin):
    """Seeded k-means++ with Lloyd iterations to an assignment fixpoint."""

    def __init__(self, n_clusters: int, seed: int = 0, max_iter: int = 100):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.cluster_centers_ = None
        self.labels_ = None
        self.n_iter_ = None

    def _init_centers(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = len(x)
        centers = np.empty((self.n_clusters, x.shape[1]))
        centers[0] = x[rng.integers(0, n)]
        d2 = np.sum((x - centers[0]) ** 2, axis=1)
        for j in range(1, self.n_clusters):
            total = d2.sum()
            if total <= 0:
                centers[j] = x[rng.integers(0, n)]
            else:
                centers[j] = x[rng.choice(n, p=d2 / total)]
            d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
        return centers

    def fit(self, x):
        x = check_array(x, "points", ndim=2)
        if self.n_clusters > len(x):
            raise ValueError(f"k={self.n_clusters} exceeds {len(x)} points")
        rng = np.random.default_rng(self.seed)
        centers = self._init_centers(x, rng)
        labels = np.full(len(x), -1)
        for it in range(self.max_iter):
            d2 = np.sum((x[:, None, :] - centers[None]) ** 2, axis=2)
            new_labels = np.argmin(d2, axis=1)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for j in range(self.n_clusters):
                mask = labels == j
                if np.any(mask):
                    centers[j] = x[mask].mean(axis=0)
                else:
                    # deterministically reseed an empty cluster at the worst-fit point
                    worst = int(np.argmax(d2[np.arange(len(x)), labels]))
                    centers[j] = x[worst]
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.n_iter_ = it + 1
        return self

    def predict(self, x):
        check_is_fitted(self, "cluster_centers_")
        x = check_array(x, "points", ndim=2)
        d2 = np.sum((x[:, None, :] - self.cluster_centers_[None]) ** 2, axis=2)
        return np.argmin(d2, axis=1)

    def fit_predict(self, x):
        return self.fit(x).labels_


@dataclass
class ReferenceSet:
    locations: np.ndarray  # (N, 3)
    yaws: np.ndarray  # (N,)
    embeddings: np.ndarray  # (N, D)
    assignments: np.ndarray  # (grid_size,) cluster index per walkable location
    budget: int
    seed: int
    grid_indices: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=np.float64)
        self.yaws = np.asarray(self.yaws, dtype=np.float64)
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.grid_indices = np.asarray(self.grid_indices, dtype=np.int64)

    def __len__(self):
        return len(self.locations)

    @property
    def poses(self) -> list[Pose]:
        return [Pose(loc, yaw) for loc, yaw in zip(self.locations, self.yaws)]

    def to_dict(self) -> dict:
        return {
            "locations": self.locations.tolist(),
            "yaws": self.yaws.tolist(),
            "embeddings": self.embeddings.tolist(),
            "assignments": self.assignments.tolist(),
            "budget": int(self.budget),
            "seed": int(self.seed),
            "grid_indices": self.grid_indices.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceSet":
        return cls(
            locations=np.asarray(d["locations"]),
            yaws=np.asarray(d["yaws"]),
            embeddings=np.asarray(d["embeddings"]),
            assignments=np.asarray(d["assignments"]),
            budget=int(d["budget"]),
            seed=int(d["seed"]),
            grid_indices=np.asarray(d.get("grid_indices", []), dtype=int),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "ReferenceSet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def auto_budget(grid: WalkableGrid, standard_distance: float = STANDARD_DISTANCE_M) -> int:
    """ceil(max horizontal walkable extent / standard distance), at least 1."""
    ext_x = float(grid.locations[:, 0].max() - grid.locations[:, 0].min())
    ext_y = float(grid.locations[:, 1].max() - grid.locations[:, 1].min())
    return max(1, math.ceil(max(ext_x, ext_y) / standard_distance))


def allocate_budget(group_sizes: list[int], budget: int) -> list[int]:
    """Proportional allocation, smallest group first, at least one per group
    while the budget lasts; strict total equal to the budget."""
    order = np.argsort(group_sizes, kind="stable")
    alloc = [0] * len(group_sizes)
    remaining_budget = budget
    remaining_size = int(np.sum(group_sizes))
    for rank, gi in enumerate(order):
        groups_left = len(order) - rank - 1
        if remaining_budget <= 0:
            break
        share = max(1, round(remaining_budget * group_sizes[gi] / max(remaining_size, 1)))
        share = min(share, remaining_budget - groups_left) if groups_left < remaining_budget else 1
        share = max(share, 1)
        share = min(share, group_sizes[gi], remaining_budget)
        alloc[gi] = share
        remaining_budget -= share
        remaining_size -= group_sizes[gi]
    return alloc


class ReferenceSampler(EstimatorMixin):
    """Pick reference poses by clustering [embedding || encoded location]."""

    def __init__(
        self,
        budget: int | str = "auto",
        standard_distance: float = STANDARD_DISTANCE_M,
        min_group_size: int = MIN_GROUP_SIZE,
        default_yaw: float = 0.0,
        seed: int = 0,
    ):
        self.budget = budget
        self.standard_distance = standard_distance
        self.min_group_size = min_group_size
        self.default_yaw = default_yaw
        self.seed = seed
        self.reference_set_ = None

    def fit(
        self,
        grid: WalkableGrid,
        scene: SceneSpec,
        embeddings: np.ndarray | None = None,
        encoder=None,
    ):
        """Cluster the grid; `embeddings` row-aligned with the grid, or an encoder
        (with `transform` over captures) to compute them; None clusters on location only."""
        if len(grid) == 0:
            raise ValueError("empty grid")
        if embeddings is None and encoder is not None:
            captures = [capture_visual(scene, loc, encoder.n_rays) for loc in grid.locations]
            embeddings = encoder.transform(captures)

        budget = auto_budget(grid, self.standard_distance) if self.budget == "auto" else int(self.budget)
        if budget > len(grid):
            log.warning("budget %d exceeds grid size %d; clamping", budget, len(grid))
            budget = len(grid)

        lo, hi = scene.bounds
        loc_feats = np.stack([encode_location(p, lo, hi) for p in grid.locations])
        loc_feats = _unit_rows(loc_feats)
        if embeddings is not None:
            emb = _unit_rows(np.asarray(embeddings, dtype=np.float64))
            feats = np.concatenate([emb, loc_feats], axis=1)
        else:
            emb = np.zeros((len(grid), 0))
            feats = loc_feats

        heights = np.round(grid.locations[:, 2]).astype(int)
        group_ids = sorted(set(heights.tolist()))
        groups = [np.nonzero(heights == h)[0] for h in group_ids]
        kept = [g for g in groups if len(g) >= self.min_group_size]
        dropped = [g for g in groups if len(g) < self.min_group_size]
        if not kept:
            kept, dropped = groups, []

        alloc = allocate_budget([len(g) for g in kept], budget)
        assignments = np.full(len(grid), -1)
        ref_rows: list[int] = []
        cluster_base = 0
        for g_idx, k in zip(kept, alloc):
            if k <= 0:
                continue
            km = KMeans(n_clusters=k, seed=self.seed).fit(feats[g_idx])
            for j in range(k):
                center = km.cluster_centers_[j]
                d2 = np.sum((feats[g_idx] - center) ** 2, axis=1)
                ref_rows.append(int(g_idx[np.argmin(d2)]))
            assignments[g_idx] = cluster_base + km.labels_
            cluster_base += k

        ref_rows_arr = np.array(ref_rows, dtype=int)
        for g in dropped:
            for i in g:
                d2 = np.sum((grid.locations[ref_rows_arr] - grid.locations[i]) ** 2, axis=1)
                assignments[i] = int(np.argmin(d2))

        self.reference_set_ = ReferenceSet(
            locations=grid.locations[ref_rows_arr],
            yaws=np.full(len(ref_rows_arr), self.default_yaw),
            embeddings=emb[ref_rows_arr] if emb.shape[1] else np.zeros((len(ref_rows_arr), 0)),
            assignments=assignments,
            budget=budget,
            seed=self.seed,
            grid_indices=ref_rows_arr,
        )
        return self

    def predict(self, locations) -> np.ndarray:
        """Cluster index of each query location (nearest reference in 3D)."""
        check_is_fitted(self, "reference_set_")
        locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
        refs = self.reference_set_.locations
        d2 = np.sum((locations[:, None] - refs[None]) ** 2, axis=2)
        return np.argmin(d2, axis=1)

    def fit_predict(self, grid, scene, **kw) -> np.ndarray:
        return self.fit(grid, scene, **kw).reference_set_.assignments


def _unit_rows(x: np.ndarray) -> np.ndarray:
    if x.shape[1] == 0:
        return x
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def uniform_reference_set(grid: WalkableGrid, budget: int, seed: int = 0, yaw: float = 0.0) -> ReferenceSet:
    """Location-only sampling fallback (ablation baseline): k-means on raw coordinates."""
    budget = min(budget, len(grid))
    km = KMeans(n_clusters=budget, seed=seed).fit(grid.locations)
    rows = []
    for j in range(budget):
        d2 = np.sum((grid.locations - km.cluster_centers_[j]) ** 2, axis=1)
        rows.append(int(np.argmin(d2)))
    rows_arr = np.array(rows, dtype=int)
    return ReferenceSet(
        locations=grid.locations[rows_arr],
        yaws=np.full(budget, yaw),
        embeddings=np.zeros((budget, 0)),
        assignments=km.labels_,
        budget=budget,
        seed=seed,
        grid_indices=rows_arr,
    )
