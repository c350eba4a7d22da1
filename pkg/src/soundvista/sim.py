"""Acoustic scene simulation.

Image-source reverberation over the listener's room box (the outer boundary
itself for single-room scenes) with straight-path transmission attenuation
through interior walls, first-order ambisonic encoding (W, X, Y, Z), cardioid
binaural decoding, and 360-degree depth/material ray scans standing in for
visual captures. Face reflectance of a room box blends partition absorption
with openings, so reverberation time is a property of the room you stand in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .scenes import (
    OPEN_MATERIAL_ID,
    OUTER_MATERIAL_ID,
    InteriorWall,
    Pose,
    SceneSpec,
)

SQRT_HALF = 1.0 / np.sqrt(2.0)
D_MIN = 0.1  # near-field clamp for the echo-response direct term (meters)
DEFAULT_LISTENER_HEIGHT = 1.5
DEFAULT_GRID_MARGIN = 0.3


@dataclass
class ImpulseResponse:
    channels: np.ndarray  # (4, T) ambisonic W, X, Y, Z
    sample_rate: int

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.ndim != 2 or self.channels.shape[0] != 4:
            raise ValueError(f"impulse response must be (4, T), got {self.channels.shape}")


@dataclass
class AmbisonicRecording:
    channels: np.ndarray  # (4, T)
    pose: Pose
    sample_rate: int

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.ndim != 2 or self.channels.shape[0] != 4:
            raise ValueError(f"ambisonic recording must be (4, T), got {self.channels.shape}")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError("ambisonic recording must be finite")


@dataclass
class BinauralAudio:
    left: np.ndarray
    right: np.ndarray
    pose: Pose
    sample_rate: int

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if self.left.shape != self.right.shape:
            raise ValueError("binaural channels must have equal length")

    @property
    def stereo(self) -> np.ndarray:
        return np.stack([self.left, self.right])


@dataclass
class VisualCapture:
    depths: np.ndarray  # (B,) meters
    materials: np.ndarray  # (B,) material ids
    location: np.ndarray  # (3,)
    max_range: float = 1.0  # scene diagonal used to clamp and normalize depths

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float64)
        self.materials = np.asarray(self.materials, dtype=np.int64)
        self.location = np.asarray(self.location, dtype=np.float64)
        if self.depths.shape != self.materials.shape:
            raise ValueError("depths and materials must align")


@dataclass
class WalkableGrid:
    locations: np.ndarray  # (n, 3) row-major by (z, y, x)
    spacing: float

    def __len__(self):
        return len(self.locations)


# walkable grid ----------------------------------------------------------------

def _point_segment_distance(px, py, wall: InteriorWall) -> float:
    ax, ay = wall.p1
    bx, by = wall.p2
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return float(np.hypot(px - (ax + t * dx), py - (ay + t * dy)))


def build_walkable_grid(
    scene: SceneSpec,
    spacing: float,
    margin: float = DEFAULT_GRID_MARGIN,
    listener_height: float = DEFAULT_LISTENER_HEIGHT,
) -> WalkableGrid:
    """Uniform per-room grid, centered inside the margin-inset rectangle."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    points = []
    for room in scene.rooms:
        w = room.x1 - room.x0 - 2 * margin
        d = room.y1 - room.y0 - 2 * margin
        if w < 0 or d < 0:
            continue
        nx = int(np.floor(w / spacing)) + 1
        ny = int(np.floor(d / spacing)) + 1
        x_start = room.x0 + (room.x1 - room.x0 - (nx - 1) * spacing) / 2.0
        y_start = room.y0 + (room.y1 - room.y0 - (ny - 1) * spacing) / 2.0
        z = room.floor_z + min(listener_height, room.height - 0.1)
        for iy in range(ny):
            for ix in range(nx):
                px = x_start + ix * spacing
                py = y_start + iy * spacing
                clear = all(
                    _point_segment_distance(px, py, wall) >= margin
                    for wall in scene.interior_walls
                    if _wall_spans_z(scene, wall, z)
                )
                if clear:
                    points.append((z, py, px))
    if not points:
        raise ValueError("empty walkable grid: rooms too small for margin/spacing")
    points.sort()
    locs = np.array([(px, py, z) for (z, py, px) in points])
    return WalkableGrid(locations=locs, spacing=spacing)


def _wall_spans_z(scene: SceneSpec, wall: InteriorWall, z: float) -> bool:
    z0, z1 = scene.wall_z_range(wall)
    return z0 <= z <= z1


# image-source reverberation -----------------------------------------------------

def _axis_images(u: float, length: float, max_order: int):
    """Image offsets along one axis with reflection counts on the lo/hi faces."""
    k_max = max_order // 2 + 1
    coords, n_lo, n_hi = [], [], []
    for m in range(-k_max, k_max + 1):
        for p in (0, 1):
            n1, n2 = abs(m - p), abs(m)
            if n1 + n2 > max_order:
                continue
            coords.append((1 - 2 * p) * u + 2 * m * length)
            n_lo.append(n1)
            n_hi.append(n2)
    return np.asarray(coords), np.asarray(n_lo), np.asarray(n_hi)


def _interior_crossings(scene: SceneSpec, starts: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Per-image total transmission loss (dB) over straight segments start->end."""
    loss = np.zeros(len(starts))
    ex, ey, ez = end
    for wall in scene.interior_walls:
        ax, ay = wall.p1
        bx, by = wall.p2
        wdx, wdy = bx - ax, by - ay
        pdx = ex - starts[:, 0]
        pdy = ey - starts[:, 1]
        den = pdx * wdy - pdy * wdx
        safe = np.abs(den) > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((ax - starts[:, 0]) * wdy - (ay - starts[:, 1]) * wdx) / den
            s = ((ax - starts[:, 0]) * pdy - (ay - starts[:, 1]) * pdx) / den
            zc = starts[:, 2] + t * (ez - starts[:, 2])
        z0, z1 = scene.wall_z_range(wall)
        hit = safe & (t > 1e-9) & (t < 1 - 1e-9) & (s >= -1e-9) & (s <= 1 + 1e-9)
        with np.errstate(invalid="ignore"):
            hit &= (zc >= z0 - 1e-9) & (zc <= z1 + 1e-9)
        loss[hit] += wall.transmission_loss_db
    return loss


def _face_absorption(scene: SceneSpec, room, n_probes: int = 32) -> dict[str, float]:
    """Effective absorption of each face of a room's box.

    A face patch covered by an interior partition reflects with that wall's
    absorption; an uncovered patch open to a neighboring room absorbs fully
    (sound escapes); a patch on the scene shell uses the outer absorption.
    """
    lo, hi = scene.bounds
    zc = room.floor_z + room.height / 2.0
    out: dict[str, float] = {}
    specs = {
        "x_neg": (room.x0, (room.y0, room.y1), (-1.0, 0.0), "y"),
        "x_pos": (room.x1, (room.y0, room.y1), (1.0, 0.0), "y"),
        "y_neg": (room.y0, (room.x0, room.x1), (0.0, -1.0), "x"),
        "y_pos": (room.y1, (room.x0, room.x1), (0.0, 1.0), "x"),
    }
    for face, (plane, span, normal, sweep_axis) in specs.items():
        total = 0.0
        for k in range(n_probes):
            s = span[0] + (k + 0.5) * (span[1] - span[0]) / n_probes
            px, py = (plane, s) if sweep_axis == "y" else (s, plane)
            alpha = None
            for wall in scene.interior_walls:
                if not _wall_spans_z(scene, wall, zc):
                    continue
                if _point_segment_distance(px, py, wall) < 1e-6:
                    alpha = wall.absorption
                    break
            if alpha is None:
                probe = (px + 1e-4 * normal[0], py + 1e-4 * normal[1], zc)
                if scene.contains(probe) and not room.contains(probe):
                    alpha = 1.0  # opening into another room: energy leaves the cavity
                else:
                    alpha = scene.outer_absorption[face]
            total += alpha
        out[face] = total / n_probes
    for face, plane, normal in (("z_neg", room.floor_z, -1.0), ("z_pos", room.floor_z + room.height, 1.0)):
        probe = ((room.x0 + room.x1) / 2.0, (room.y0 + room.y1) / 2.0, plane + 1e-4 * normal)
        if scene.contains(probe) and not room.contains(probe):
            out[face] = 1.0
        else:
            out[face] = scene.outer_absorption[face]
    return out


def simulate_rir(
    scene: SceneSpec,
    source_loc,
    listener: Pose,
    max_order: int = 30,
    rir_length_s: float = 1.0,
) -> ImpulseResponse:
    """First-order ambisonic RIR via the image-source method over the outer shell."""
    source_loc = np.asarray(source_loc, dtype=np.float64)
    if not np.all(np.isfinite(source_loc)) or not np.all(np.isfinite(listener.location)):
        raise ValueError("non-finite geometry")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if not scene.contains(source_loc):
        raise ValueError(f"source {source_loc} outside rooms")
    if not scene.contains(listener.location):
        raise ValueError(f"listener {listener.location} outside rooms")

    # the reverberant cavity is the listener's room box; for a single-room
    # scene this is exactly the outer boundary
    room = scene.rooms[scene.room_index(listener.location)]
    lo = np.array([room.x0, room.y0, room.floor_z])
    hi = np.array([room.x1, room.y1, room.floor_z + room.height])
    size = hi - lo
    u = source_loc - lo

    cx, nlx, nhx = _axis_images(u[0], size[0], max_order)
    cy, nly, nhy = _axis_images(u[1], size[1], max_order)
    cz, nlz, nhz = _axis_images(u[2], size[2], max_order)

    n_tot = (
        (nlx + nhx)[:, None, None]
        + (nly + nhy)[None, :, None]
        + (nlz + nhz)[None, None, :]
    )
    keep = n_tot <= max_order
    ix, iy, iz = np.nonzero(keep)

    pos = np.empty((len(ix), 3))
    pos[:, 0] = lo[0] + cx[ix]
    pos[:, 1] = lo[1] + cy[iy]
    pos[:, 2] = lo[2] + cz[iz]

    face_alpha = _face_absorption(scene, room) if scene.interior_walls or len(scene.rooms) > 1 else scene.outer_absorption
    beta = np.array(
        [
            1.0 - face_alpha["x_neg"],
            1.0 - face_alpha["x_pos"],
            1.0 - face_alpha["y_neg"],
            1.0 - face_alpha["y_pos"],
            1.0 - face_alpha["z_neg"],
            1.0 - face_alpha["z_pos"],
        ]
    )
    refl = (
        beta[0] ** nlx[ix]
        * beta[1] ** nhx[ix]
        * beta[2] ** nly[iy]
        * beta[3] ** nhy[iy]
        * beta[4] ** nlz[iz]
        * beta[5] ** nhz[iz]
    )

    delta = pos - listener.location[None, :]
    dist = np.linalg.norm(delta, axis=1)
    d_amp = np.maximum(dist, D_MIN)

    if scene.interior_walls:
        loss_db = _interior_crossings(scene, pos, listener.location)
        trans = 10.0 ** (-loss_db / 20.0)
    else:
        trans = 1.0

    amp = refl / d_amp * trans

    # arrival direction (from listener toward the image source), world frame
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = delta / dist[:, None]
    degenerate = dist < 1e-9
    unit[degenerate] = 0.0
    az = np.arctan2(unit[:, 1], unit[:, 0])
    el = np.arcsin(np.clip(unit[:, 2], -1.0, 1.0))

    gains = np.stack(
        [
            np.full(len(amp), SQRT_HALF),
            np.cos(az) * np.cos(el),
            np.sin(az) * np.cos(el),
            np.sin(el),
        ]
    )
    gains[1:, degenerate] = 0.0

    fs = scene.sample_rate
    n_samples = int(round(rir_length_s * fs))
    delays = dist / scene.speed_of_sound * fs
    idx = np.floor(delays).astype(np.int64)
    frac = delays - idx
    # snap near-integer delays so exact-sample arrivals stay single impulses
    hi = frac > 1.0 - 1e-9
    idx[hi] += 1
    frac[hi] = 0.0
    frac[frac < 1e-9] = 0.0
    valid = idx + 1 < n_samples
    idx, frac, amp = idx[valid], frac[valid], amp[valid]
    gains = gains[:, valid]

    channels = np.zeros((4, n_samples))
    for ch in range(4):
        contrib = amp * gains[ch]
        channels[ch] += np.bincount(idx, weights=contrib * (1.0 - frac), minlength=n_samples)
        channels[ch] += np.bincount(idx + 1, weights=contrib * frac, minlength=n_samples)
    return ImpulseResponse(channels=channels, sample_rate=fs)


def echo_response(scene: SceneSpec, location, max_order: int = 30, rir_length_s: float = 1.0) -> ImpulseResponse:
    """RIR with emitter and listener co-located."""
    return simulate_rir(scene, location, Pose(np.asarray(location)), max_order, rir_length_s)


# rendering ---------------------------------------------------------------------

def render_ambient(
    scene: SceneSpec,
    listener: Pose,
    duration: float = 4.0,
    max_order: int = 30,
    rir_length_s: float = 1.0,
    rir_cache: dict | None = None,
) -> AmbisonicRecording:
    """Sum of every source's signal convolved with its RIR to the listener."""
    if not scene.sources:
        raise ValueError("scene has no sources")
    for src in scene.sources:
        sr = getattr(src, "sample_rate", None)
        if sr is not None and sr != scene.sample_rate:
            raise ValueError(f"source sample rate {sr} != scene rate {scene.sample_rate}")
    out_len = int(round(duration * scene.sample_rate))
    total = np.zeros((4, out_len))
    for si, src in enumerate(scene.sources):
        key = (si, tuple(np.round(listener.location, 9)))
        if rir_cache is not None and key in rir_cache:
            rir = rir_cache[key]
        else:
            rir = simulate_rir(scene, src.location, listener, max_order, rir_length_s)
            if rir_cache is not None:
                rir_cache[key] = rir
        conv_len = len(src.signal) + rir.channels.shape[1] - 1
        n = min(conv_len, out_len)
        for ch in range(4):
            y = fftconvolve(src.signal, rir.channels[ch])
            total[ch, :n] += src.gain * y[:n]
    return AmbisonicRecording(channels=total, pose=listener, sample_rate=scene.sample_rate)


def decode_binaural(rec: AmbisonicRecording, yaw: float, pitch: float = 0.0) -> BinauralAudio:
    """Rotate the field into the head frame, then cardioid-decode left/right ears."""
    w, x, y, _z = rec.channels
    cy_, sy_ = np.cos(yaw), np.sin(yaw)
    y_head = -x * sy_ + y * cy_
    left = 0.5 * (np.sqrt(2.0) * w + y_head)
    right = 0.5 * (np.sqrt(2.0) * w - y_head)
    pose = Pose(rec.pose.location.copy(), yaw, pitch)
    return BinauralAudio(left=left, right=right, pose=pose, sample_rate=rec.sample_rate)


# visual captures -----------------------------------------------------------------

def _ray_segment_hits(ox, oy, dx, dy, ax, ay, bx, by):
    """Ray-vs-segment intersection parameter t, or None."""
    wdx, wdy = bx - ax, by - ay
    den = dx * wdy - dy * wdx
    if abs(den) < 1e-12:
        return None
    t = ((ax - ox) * wdy - (ay - oy) * wdx) / den
    s = ((ax - ox) * dy - (ay - oy) * dx) / den
    if t > 1e-9 and -1e-9 <= s <= 1 + 1e-9:
        return t
    return None


def capture_visual(scene: SceneSpec, location, n_rays: int = 64) -> VisualCapture:
    """Depth + material scan over uniform azimuths starting at 0 rad."""
    location = np.asarray(location, dtype=np.float64)
    if not scene.contains(location):
        raise ValueError(f"capture location {location} not inside rooms")
    z = location[2]
    diag = scene.diagonal
    depths = np.empty(n_rays)
    materials = np.empty(n_rays, dtype=np.int64)
    for b in range(n_rays):
        ang = 2.0 * np.pi * b / n_rays
        dx, dy = np.cos(ang), np.sin(ang)
        hits: list[tuple[float, int]] = []  # (t, material or -1 for room edge)
        for wall in scene.interior_walls:
            if not _wall_spans_z(scene, wall, z):
                continue
            t = _ray_segment_hits(location[0], location[1], dx, dy, *wall.p1, *wall.p2)
            if t is not None:
                hits.append((t, scene.wall_material_id(wall)))
        for room in scene.rooms:
            if not (room.floor_z <= z <= room.floor_z + room.height):
                continue
            edges = (
                (room.x0, room.y0, room.x1, room.y0),
                (room.x1, room.y0, room.x1, room.y1),
                (room.x1, room.y1, room.x0, room.y1),
                (room.x0, room.y1, room.x0, room.y0),
            )
            for e in edges:
                t = _ray_segment_hits(location[0], location[1], dx, dy, *e)
                if t is not None:
                    hits.append((t, -1))
        hits.sort()
        depth, mat = diag, OPEN_MATERIAL_ID
        for t, m in hits:
            if m >= 0:
                depth, mat = t, m
                break
            probe = (location[0] + (t + 1e-6) * dx, location[1] + (t + 1e-6) * dy, z)
            if not scene.contains(probe, eps=1e-9):
                depth, mat = t, OUTER_MATERIAL_ID
                break
        depths[b] = min(depth, diag)
        materials[b] = mat
    return VisualCapture(depths=depths, materials=materials, location=location, max_range=diag)
