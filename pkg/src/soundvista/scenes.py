"""Scene descriptions: rectilinear rooms, interior walls, sources, materials.

Scene files are plain JSON mirroring these dataclasses field for field
(lengths in meters, absorption unitless, snake_case keys). Source signals
are stored inline as sample lists so a scene file is self-contained.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import ambient_source_signal

OUTER_FACES = ("x_neg", "x_pos", "y_neg", "y_pos", "z_neg", "z_pos")
OPEN_MATERIAL_ID = 0
OUTER_MATERIAL_ID = 1


def wrap_yaw(yaw: float) -> float:
    """Wrap into [-pi, pi)."""
    return float((yaw + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass
class Pose:
    location: np.ndarray  # (3,) meters
    yaw: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        self.location = np.asarray(self.location, dtype=np.float64)
        if self.location.shape != (3,):
            raise ValueError(f"pose location must be a 3-vector, got {self.location.shape}")
        if not np.all(np.isfinite(self.location)):
            raise ValueError("pose location must be finite")
        self.yaw = wrap_yaw(float(self.yaw))
        self.pitch = float(self.pitch)
        if not -math.pi / 2 <= self.pitch <= math.pi / 2:
            raise ValueError(f"pitch out of range: {self.pitch}")

    def to_dict(self) -> dict:
        return {"location": self.location.tolist(), "yaw": self.yaw, "pitch": self.pitch}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(np.asarray(d["location"]), float(d.get("yaw", 0.0)), float(d.get("pitch", 0.0)))


@dataclass
class Room:
    x0: float
    y0: float
    x1: float
    y1: float
    floor_z: float = 0.0
    height: float = 3.0

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"room has non-positive area: {self}")
        if self.height <= 0:
            raise ValueError("room height must be positive")

    def contains_xy(self, x: float, y: float, eps: float = 1e-9) -> bool:
        return self.x0 - eps <= x <= self.x1 + eps and self.y0 - eps <= y <= self.y1 + eps

    def contains(self, p, eps: float = 1e-9) -> bool:
        return (
            self.contains_xy(p[0], p[1], eps)
            and self.floor_z - eps <= p[2] <= self.floor_z + self.height + eps
        )


@dataclass
class InteriorWall:
    p1: tuple[float, float]
    p2: tuple[float, float]
    transmission_loss_db: float = 10.0
    absorption: float = 0.5
    z0: float | None = None  # defaults to full scene height
    z1: float | None = None

    def __post_init__(self):
        if self.transmission_loss_db < 0:
            raise ValueError("transmission_loss_db must be >= 0")
        if not 0.0 <= self.absorption <= 1.0:
            raise ValueError("absorption must lie in [0, 1]")
        if math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]) <= 0:
            raise ValueError("degenerate interior wall segment")


@dataclass
class SoundSource:
    location: np.ndarray  # (3,)
    signal: np.ndarray  # mono, scene sample rate
    gain: float = 1.0

    def __post_init__(self):
        self.location = np.asarray(self.location, dtype=np.float64)
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if self.location.shape != (3,):
            raise ValueError("source location must be a 3-vector")
        if not np.all(np.isfinite(self.signal)):
            raise ValueError("source signal must be finite-valued")
        if self.gain <= 0:
            raise ValueError("source gain must be > 0")


def _as_outer_absorption(value) -> dict[str, float]:
    if isinstance(value, (int, float)):
        value = {face: float(value) for face in OUTER_FACES}
    out = {face: float(value.get(face, 0.3)) for face in OUTER_FACES}
    for face, a in out.items():
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"outer absorption[{face}] out of [0,1]: {a}")
    return out


@dataclass
class SceneSpec:
    rooms: list[Room]
    interior_walls: list[InteriorWall] = field(default_factory=list)
    outer_absorption: dict[str, float] = 0.3  # scalar accepted, normalized per face
    sources: list[SoundSource] = field(default_factory=list)
    sample_rate: int = 16000
    speed_of_sound: float = 343.0
    name: str = "scene"

    def __post_init__(self):
        if not self.rooms:
            raise ValueError("scene needs at least one room")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.outer_absorption = _as_outer_absorption(self.outer_absorption)
        for src in self.sources:
            if not self.contains(src.location):
                raise ValueError(f"source at {src.location} lies outside all rooms")

    # geometry ---------------------------------------------------------------
    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array(
            [
                min(r.x0 for r in self.rooms),
                min(r.y0 for r in self.rooms),
                min(r.floor_z for r in self.rooms),
            ]
        )
        hi = np.array(
            [
                max(r.x1 for r in self.rooms),
                max(r.y1 for r in self.rooms),
                max(r.floor_z + r.height for r in self.rooms),
            ]
        )
        return lo, hi

    @property
    def diagonal(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    def contains(self, p, eps: float = 1e-9) -> bool:
        return any(r.contains(p, eps) for r in self.rooms)

    def room_index(self, p) -> int:
        for i, r in enumerate(self.rooms):
            if r.contains(p):
                return i
        return -1

    def wall_z_range(self, wall: InteriorWall) -> tuple[float, float]:
        lo, hi = self.bounds
        return (
            wall.z0 if wall.z0 is not None else float(lo[2]),
            wall.z1 if wall.z1 is not None else float(hi[2]),
        )

    # materials ----------------------------------------------------------------
    def material_table(self) -> list[dict]:
        """id -> (absorption, transmission_loss_db); id 0 is open space, 1 the shell."""
        outer_mean = float(np.mean(list(self.outer_absorption.values())))
        table = [
            {"id": OPEN_MATERIAL_ID, "name": "open", "absorption": 0.0, "transmission_loss_db": 0.0},
            {"id": OUTER_MATERIAL_ID, "name": "outer", "absorption": outer_mean, "transmission_loss_db": 0.0},
        ]
        seen: dict[tuple[float, float], int] = {}
        for wall in self.interior_walls:
            key = (round(wall.absorption, 6), round(wall.transmission_loss_db, 6))
            if key not in seen:
                mid = len(table)
                seen[key] = mid
                table.append(
                    {
                        "id": mid,
                        "name": f"interior_{mid}",
                        "absorption": wall.absorption,
                        "transmission_loss_db": wall.transmission_loss_db,
                    }
                )
        return table

    def wall_material_id(self, wall: InteriorWall) -> int:
        key = (round(wall.absorption, 6), round(wall.transmission_loss_db, 6))
        seen: dict[tuple[float, float], int] = {}
        mid = OUTER_MATERIAL_ID + 1
        for w in self.interior_walls:
            k = (round(w.absorption, 6), round(w.transmission_loss_db, 6))
            if k not in seen:
                seen[k] = mid
                mid += 1
        return seen[key]

    # persistence ----------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rooms": [
                {
                    "x0": r.x0,
                    "y0": r.y0,
                    "x1": r.x1,
                    "y1": r.y1,
                    "floor_z": r.floor_z,
                    "height": r.height,
                }
                for r in self.rooms
            ],
            "interior_walls": [
                {
                    "p1": list(w.p1),
                    "p2": list(w.p2),
                    "transmission_loss_db": w.transmission_loss_db,
                    "absorption": w.absorption,
                    "z0": w.z0,
                    "z1": w.z1,
                }
                for w in self.interior_walls
            ],
            "outer_absorption": self.outer_absorption,
            "sources": [
                {
                    "location": s.location.tolist(),
                    "signal": s.signal.tolist(),
                    "gain": s.gain,
                }
                for s in self.sources
            ],
            "sample_rate": self.sample_rate,
            "speed_of_sound": self.speed_of_sound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            rooms=[Room(**r) for r in d["rooms"]],
            interior_walls=[
                InteriorWall(
                    p1=tuple(w["p1"]),
                    p2=tuple(w["p2"]),
                    transmission_loss_db=w.get("transmission_loss_db", 10.0),
                    absorption=w.get("absorption", 0.5),
                    z0=w.get("z0"),
                    z1=w.get("z1"),
                )
                for w in d.get("interior_walls", [])
            ],
            outer_absorption=d.get("outer_absorption", 0.3),
            sources=[
                SoundSource(
                    location=np.asarray(s["location"]),
                    signal=np.asarray(s["signal"]),
                    gain=float(s.get("gain", 1.0)),
                )
                for s in d.get("sources", [])
            ],
            sample_rate=int(d.get("sample_rate", 16000)),
            speed_of_sound=float(d.get("speed_of_sound", 343.0)),
            name=d.get("name", "scene"),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


# deterministic scene builders -------------------------------------------------

def single_room_scene(
    size: tuple[float, float] = (4.0, 4.0),
    absorption: float = 0.3,
    n_sources: int = 1,
    seed: int = 0,
    duration: float = 4.0,
    sample_rate: int = 16000,
    name: str = "single",
) -> SceneSpec:
    rng = np.random.default_rng(seed)
    room = Room(0.0, 0.0, size[0], size[1])
    sources = []
    for _ in range(n_sources):
        loc = np.array(
            [
                rng.uniform(0.5, size[0] - 0.5),
                rng.uniform(0.5, size[1] - 0.5),
                rng.uniform(0.8, 2.0),
            ]
        )
        sources.append(
            SoundSource(loc, ambient_source_signal(rng, sample_rate, duration), gain=1.0)
        )
    return SceneSpec(
        rooms=[room],
        outer_absorption=absorption,
        sources=sources,
        sample_rate=sample_rate,
        name=name,
    )


def two_room_scene(
    door_width: float = 0.8,
    sizes: tuple[tuple[float, float], tuple[float, float]] = ((5.0, 4.0), (3.0, 4.0)),
    transmission_loss_db: float = 14.0,
    outer_absorption: dict | float | None = None,
    wall_absorption: float = 0.25,
    n_sources: int = 2,
    seed: int = 0,
    duration: float = 4.0,
    sample_rate: int = 16000,
    name: str = "two_room",
) -> SceneSpec:
    """Two rooms side by side along x, joined by a door gap in a lossy wall.

    The default face treatment makes the small east room noticeably deader
    than the large west room, so reverberation maps jump at the partition.
    """
    if outer_absorption is None:
        outer_absorption = {
            "x_neg": 0.08,
            "x_pos": 0.55,
            "y_neg": 0.12,
            "y_pos": 0.12,
            "z_neg": 0.15,
            "z_pos": 0.15,
        }
    (wa, da), (wb, db) = sizes
    depth = max(da, db)
    room_a = Room(0.0, 0.0, wa, da)
    room_b = Room(wa, 0.0, wa + wb, db)
    gap_lo = depth / 2.0 - door_width / 2.0
    gap_hi = depth / 2.0 + door_width / 2.0
    walls = []
    if gap_lo > 0:
        walls.append(
            InteriorWall((wa, 0.0), (wa, gap_lo), transmission_loss_db, wall_absorption)
        )
    if gap_hi < min(da, db):
        walls.append(
            InteriorWall((wa, gap_hi), (wa, min(da, db)), transmission_loss_db, wall_absorption)
        )
    rng = np.random.default_rng(seed)
    sources = []
    rooms = [room_a, room_b]
    for i in range(n_sources):
        r = rooms[i % 2]
        loc = np.array(
            [
                rng.uniform(r.x0 + 0.5, r.x1 - 0.5),
                rng.uniform(r.y0 + 0.5, r.y1 - 0.5),
                rng.uniform(0.8, 2.0),
            ]
        )
        sources.append(
            SoundSource(loc, ambient_source_signal(rng, sample_rate, duration), gain=1.0)
        )
    return SceneSpec(
        rooms=rooms,
        interior_walls=walls,
        outer_absorption=outer_absorption,
        sources=sources,
        sample_rate=sample_rate,
        name=name,
    )


def multi_room_scene(
    seed: int,
    n_rooms: int | None = None,
    n_sources: int = 3,
    duration: float = 4.0,
    sample_rate: int = 16000,
    name: str | None = None,
) -> SceneSpec:
    """Randomized row of 2-3 rooms with lossy doorway walls; fully seeded."""
    rng = np.random.default_rng(seed)
    if n_rooms is None:
        n_rooms = int(rng.integers(2, 4))
    depth = float(rng.uniform(3.5, 4.5))
    widths = [float(rng.uniform(2.8, 4.5)) for _ in range(n_rooms)]
    rooms = []
    walls = []
    x = 0.0
    for i, w in enumerate(widths):
        rooms.append(Room(x, 0.0, x + w, depth))
        x += w
        if i < n_rooms - 1:
            door = float(rng.uniform(0.7, 1.1))
            cy = float(rng.uniform(door / 2 + 0.3, depth - door / 2 - 0.3))
            tl = float(rng.uniform(10.0, 18.0))
            absorb = float(rng.uniform(0.4, 0.8))
            if cy - door / 2 > 0:
                walls.append(InteriorWall((x, 0.0), (x, cy - door / 2), tl, absorb))
            if cy + door / 2 < depth:
                walls.append(InteriorWall((x, cy + door / 2), (x, depth), tl, absorb))
    sources = []
    for i in range(n_sources):
        r = rooms[int(rng.integers(0, n_rooms))]
        loc = np.array(
            [
                rng.uniform(r.x0 + 0.5, r.x1 - 0.5),
                rng.uniform(r.y0 + 0.5, r.y1 - 0.5),
                rng.uniform(0.8, 2.0),
            ]
        )
        sources.append(
            SoundSource(loc, ambient_source_signal(rng, sample_rate, duration), gain=1.0)
        )
    return SceneSpec(
        rooms=rooms,
        interior_walls=walls,
        outer_absorption=float(rng.uniform(0.12, 0.3)),
        sources=sources,
        sample_rate=sample_rate,
        name=name or f"multi_{seed}",
    )
