"""Density clustering of latent trajectories with a dual spatial/temporal gate:
a neighbor must be within both a latent-space radius and a frame-index radius.
Includes a naive reference implementation used as a testing oracle."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .episodes import LatentPoint, LatentTrajectory

NOISE = -1
_UNSEEN = -2


@dataclass(frozen=True)
class StParams:
    """Dual-radius density parameters; min_pts counts the point itself."""

    eps_spatial: float
    eps_temporal: float
    min_pts: int

    def __post_init__(self):
        if self.eps_spatial <= 0 or self.eps_temporal <= 0 or self.min_pts <= 0:
            raise ValueError("eps_spatial, eps_temporal and min_pts must all be positive")


@dataclass(frozen=True)
class ClusterLabeling:
    """Per-point labels: NOISE (-1) or a cluster id in 0..n_clusters-1."""

    labels: tuple[int, ...]
    n_clusters: int

    def __post_init__(self):
        used = set(self.labels) - {NOISE}
        if used != set(range(self.n_clusters)):
            raise ValueError(
                f"labels must use exactly the ids 0..{self.n_clusters - 1}, got {sorted(used)}"
            )

    def members(self, k: int) -> list[int]:
        return [i for i, l in enumerate(self.labels) if l == k]


def _gate_arrays(points: Sequence[LatentPoint]):
    z = np.stack([p.z for p in points])
    t = np.array([p.t for p in points], dtype=np.float64)
    return z, t


def _neighbor_indices(z: np.ndarray, t: np.ndarray, i: int, p: StParams) -> np.ndarray:
    d2 = np.sum((z - z[i]) ** 2, axis=1)
    mask = (d2 <= p.eps_spatial**2) & (np.abs(t - t[i]) <= p.eps_temporal)
    return np.nonzero(mask)[0]


def neighborhood(points: Sequence[LatentPoint], i: int, p: StParams) -> set[int]:
    """Indices within both radii of point i (always includes i itself)."""
    if not 0 <= i < len(points):
        raise IndexError(f"point index {i} out of range for {len(points)} points")
    z, t = _gate_arrays(points)
    return set(int(j) for j in _neighbor_indices(z, t, i, p))


def st_dbscan(traj: LatentTrajectory, p: StParams) -> ClusterLabeling:
    """Density clustering over one trajectory.

    A point is core when its dual-gate neighborhood has at least min_pts
    members; clusters are the maximal density-connected sets; non-core points
    inside a core's neighborhood join as borders, the rest are noise. Cluster
    ids follow the order in which core points are first reached scanning in
    ascending frame index, so output is deterministic.
    """
    points = traj.points
    n = len(points)
    z, t = _gate_arrays(points)
    labels = np.full(n, _UNSEEN, dtype=np.int64)
    k = 0
    for i in range(n):
        if labels[i] != _UNSEEN:
            continue
        nb = _neighbor_indices(z, t, i, p)
        if nb.size < p.min_pts:
            labels[i] = NOISE
            continue
        labels[i] = k
        queue = deque(int(j) for j in nb if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = k  # border point
                continue
            if labels[j] != _UNSEEN:
                continue
            labels[j] = k
            nbj = _neighbor_indices(z, t, j, p)
            if nbj.size >= p.min_pts:
                queue.extend(int(m) for m in nbj if labels[m] in (_UNSEEN, NOISE))
        k += 1
    return ClusterLabeling(tuple(int(l) for l in labels), k)


def st_dbscan_oracle(traj: LatentTrajectory, p: StParams) -> ClusterLabeling:
    """Reference implementation: full neighbor matrix plus transitive closure
    of core adjacency. Same contract as st_dbscan; intended for tests."""
    points = traj.points
    n = len(points)
    z, t = _gate_arrays(points)
    d2 = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=2)
    adj = (d2 <= p.eps_spatial**2) & (np.abs(t[:, None] - t[None, :]) <= p.eps_temporal)
    core = adj.sum(axis=1) >= p.min_pts

    comp = np.full(n, -1, dtype=np.int64)
    k = 0
    for i in range(n):
        if not core[i] or comp[i] != -1:
            continue
        stack = [i]
        comp[i] = k
        while stack:
            a = stack.pop()
            for b in np.nonzero(adj[a] & core)[0]:
                if comp[b] == -1:
                    comp[b] = k
                    stack.append(int(b))
        k += 1

    labels = np.full(n, NOISE, dtype=np.int64)
    for i in range(n):
        if core[i]:
            labels[i] = comp[i]
        else:
            owners = comp[adj[i] & core]
            if owners.size:
                labels[i] = owners.min()  # first-discovered cluster claims the border
    return ClusterLabeling(tuple(int(l) for l in labels), k)


def default_params(traj: LatentTrajectory, seed: int = 0) -> StParams:
    """Data-relative defaults: spatial radius half the median pairwise latent
    distance (on a seeded subsample of at most 1000 points), temporal radius
    5% of the episode length (at least one frame), min_pts 4."""
    z = traj.latents()
    n = len(traj)
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=min(n, 1000), replace=False)
    sub = z[idx]
    m = sub.shape[0]
    if m < 2:
        eps_spatial = 1e-9
    else:
        sq = np.sum(sub**2, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (sub @ sub.T), 0.0)
        upper = d2[np.triu_indices(m, k=1)]
        eps_spatial = max(0.5 * float(np.median(np.sqrt(upper))), 1e-9)
    return StParams(eps_spatial, max(1.0, 0.05 * n), 4)
