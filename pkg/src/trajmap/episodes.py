"""Episode ingest and latent extraction: load raw frame archives listed in a
manifest, or synthesize desk-scale test episodes, then encode each episode
into a time-indexed latent trajectory."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .vae import Frame, VaeParams, encode

FRAMES_MAGIC = b"FRAMES1\n"
_HEADER_RE = re.compile(rb"^n=(\d+);h=(\d+);w=(\d+);c=(\d+)$")


@dataclass(frozen=True, eq=False)
class Episode:
    """One replay: an ordered frame sequence tagged with the agent that produced it."""

    episode_id: str
    agent_label: str
    frames: tuple[Frame, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError(f"episode {self.episode_id!r} has no frames")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise ShapeError(
                    f"episode {self.episode_id!r}: frame {i} has shape {f.shape}, expected {shape}"
                )
        object.__setattr__(self, "frames", frames)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Episode)
            and self.episode_id == other.episode_id
            and self.agent_label == other.agent_label
            and self.frames == other.frames
        )


@dataclass(frozen=True, eq=False)
class LatentPoint:
    """One frame's latent code: episode, frame index, vector."""

    episode_id: str
    t: int
    z: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("frame index must be nonnegative")
        z = np.ascontiguousarray(np.asarray(self.z, dtype=np.float64))
        if z.ndim != 1:
            raise ShapeError("latent vector must be 1-d")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LatentPoint)
            and self.episode_id == other.episode_id
            and self.t == other.t
            and np.array_equal(self.z, other.z)
        )


@dataclass(frozen=True, eq=False)
class LatentTrajectory:
    """An episode's latent points, in frame order with indices 0..N-1."""

    episode_id: str
    points: tuple[LatentPoint, ...]

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise ValueError(f"trajectory {self.episode_id!r} has no points")
        for i, pt in enumerate(points):
            if pt.t != i:
                raise ValueError(
                    f"trajectory {self.episode_id!r}: point {i} has t={pt.t}; "
                    "indices must be 0..N-1 in order"
                )
            if pt.episode_id != self.episode_id:
                raise ValueError("all points must belong to the trajectory's episode")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)

    def latents(self) -> np.ndarray:
        """Stack point vectors into an (n, d) array."""
        return np.stack([p.z for p in self.points])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LatentTrajectory)
            and self.episode_id == other.episode_id
            and self.points == other.points
        )


# --- raw frame archives -----------------------------------------------------


def write_frames_file(path: str | Path, frames_u8: np.ndarray) -> None:
    """Write an (n, h, w, c) uint8 array as a raw frame archive."""
    a = np.asarray(frames_u8)
    if a.ndim != 4:
        raise ShapeError(f"expected (n, h, w, c) array, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise ValueError("frame archive pixels must be uint8")
    n, h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(FRAMES_MAGIC)
        fh.write(f"n={n};h={h};w={w};c={c}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_frames_file(path: str | Path) -> np.ndarray:
    """Read a raw frame archive back into an (n, h, w, c) uint8 array."""
    with open(path, "rb") as fh:
        magic = fh.read(len(FRAMES_MAGIC))
        if magic != FRAMES_MAGIC:
            raise FormatError(f"{path}: not a frame archive (bad magic)")
        header = fh.readline().rstrip(b"\n")
        m = _HEADER_RE.match(header)
        if not m:
            raise FormatError(f"{path}: malformed header {header!r}")
        n, h, w, c = (int(g) for g in m.groups())
        body = fh.read()
    if len(body) != n * h * w * c:
        raise FormatError(f"{path}: expected {n * h * w * c} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, h, w, c)


def load_episodes(manifest_path: str | Path, to_grayscale: bool = True) -> list[Episode]:
    """Load every episode listed in a manifest, normalizing pixels to [0, 1].

    The manifest is JSON: {"episodes": [{"id", "agent", "frames"}]} with frame
    archive paths resolved relative to the manifest's directory. Multi-channel
    frames are averaged to grayscale unless to_grayscale is False.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("episodes"), list):
        raise FormatError(f"{manifest_path}: manifest must contain an 'episodes' list")

    episodes = []
    for i, entry in enumerate(doc["episodes"]):
        if not isinstance(entry, dict) or not {"id", "agent", "frames"} <= set(entry):
            raise FormatError(f"{manifest_path}: episode {i} must have id, agent and frames")
        raw = read_frames_file(manifest_path.parent / entry["frames"])
        pixels = raw.astype(np.float64) / 255.0
        if to_grayscale and pixels.shape[3] > 1:
            pixels = pixels.mean(axis=3, keepdims=True)
        frames = tuple(Frame(pixels[t]) for t in range(pixels.shape[0]))
        episodes.append(Episode(str(entry["id"]), str(entry["agent"]), frames))
    return episodes


# --- synthetic episodes -----------------------------------------------------


def _pick_anchors(rng: np.random.Generator, side: int, n_segments: int, max_transit: int):
    """Choose dot anchor centers whose connecting walks fit the transit budget.

    Anchors are chain-sampled: mutually separated so the plateau images stay
    distinct, but with at most 3 strictly-between frames per leg so transit
    samples are always too sparse to dominate the dwell plateaus' density.
    """
    lo, hi = 1, side - 2  # 3x3 dot stays fully inside the canvas
    for sep in range(4, 0, -1):
        for _ in range(60):
            anchors = [(int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))]
            while len(anchors) < n_segments:
                prev = anchors[-1]
                for _ in range(200):
                    cand = (
                        int(np.clip(prev[0] + rng.integers(-8, 9), lo, hi)),
                        int(np.clip(prev[1] + rng.integers(-8, 9), lo, hi)),
                    )
                    if len(_walk_between(prev, cand)) > 3:
                        continue
                    if all(max(abs(cand[0] - a[0]), abs(cand[1] - a[1])) >= sep for a in anchors):
                        anchors.append(cand)
                        break
                else:
                    break
            if len(anchors) == n_segments and _transit_frames(anchors) <= max_transit:
                return anchors
    # serpentine grid fallback: adjacent anchors, zero strictly-between frames
    for spacing in (2, 1):
        anchors = []
        for ri, r in enumerate(range(lo, hi + 1, spacing)):
            cols = list(range(lo, hi + 1, spacing))
            if ri % 2:
                cols.reverse()
            for c in cols:
                anchors.append((r, c))
                if len(anchors) == n_segments:
                    return anchors
    raise ValueError(f"cannot place {n_segments} distinct anchors on a {side}x{side} canvas")


def _walk_between(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer positions strictly between a and b, moving at most 2 px per frame."""
    pts = []
    r, c = a
    while c != b[1]:
        c += max(-2, min(2, b[1] - c))
        if (r, c) != b:
            pts.append((r, c))
    while r != b[0]:
        r += max(-2, min(2, b[0] - r))
        if (r, c) != b:
            pts.append((r, c))
    return pts


def _transit_frames(anchors: list[tuple[int, int]]) -> int:
    return sum(len(_walk_between(a, b)) for a, b in zip(anchors, anchors[1:]))


def synth_moving_dot(n_frames: int, side: int, seed: int, n_segments: int) -> Episode:
    """Generate a side x side x 1 episode of a bright 3x3 dot visiting anchors.

    The dot dwells at each of n_segments distinct anchor positions in turn
    (dwell phases cover at least 60% of frames) and walks between anchors in
    steps of at most 2 px, so the rendered path is continuous. Deterministic
    per seed.
    """
    if side < 8:
        raise ValueError("side must be >= 8")
    if not 1 <= n_segments <= n_frames:
        raise ValueError("need n_frames >= n_segments >= 1")
    rng = np.random.default_rng(seed)
    max_transit = min(int(0.4 * n_frames), n_frames - n_segments)
    anchors = _pick_anchors(rng, side, n_segments, max_transit)

    dwell_total = n_frames - _transit_frames(anchors)
    base, extra = divmod(dwell_total, n_segments)
    centers: list[tuple[int, int]] = []
    for i, anchor in enumerate(anchors):
        centers.extend([anchor] * (base + (1 if i < extra else 0)))
        if i + 1 < n_segments:
            centers.extend(_walk_between(anchor, anchors[i + 1]))
    assert len(centers) == n_frames

    frames = []
    for r, c in centers:
        img = np.zeros((side, side, 1))
        img[r - 1 : r + 2, c - 1 : c + 2, 0] = 1.0
        frames.append(Frame(img))
    return Episode(f"dot-{seed}", "synthetic", tuple(frames))


# --- latent extraction ------------------------------------------------------


def encode_episode(params: VaeParams, ep: Episode) -> LatentTrajectory:
    """Encode every frame to its posterior mean, preserving frame order."""
    points = tuple(
        LatentPoint(ep.episode_id, t, encode(params, frame).mu)
        for t, frame in enumerate(ep.frames)
    )
    return LatentTrajectory(ep.episode_id, points)
