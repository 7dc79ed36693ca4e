"""Turn cluster labelings into an abstract transition graph: decode each
cluster's componentwise-median latent into a representative image, then link
the visited states of every episode in chronological order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import NOISE, ClusterLabeling
from .episodes import LatentTrajectory
from .errors import ConsistencyError, ShapeError
from .vae import Frame, VaeParams, decode


@dataclass(frozen=True, eq=False)
class MajorState:
    """A decoded cluster representative: one node of the abstract graph."""

    node_id: str
    episode_id: str
    cluster_id: int
    median_z: np.ndarray
    thumbnail: Frame
    member_count: int
    t_first: int
    t_last: int

    def __post_init__(self):
        if self.member_count < 1:
            raise ValueError("member_count must be >= 1")
        if self.t_first > self.t_last:
            raise ValueError("t_first must not exceed t_last")
        z = np.ascontiguousarray(np.asarray(self.median_z, dtype=np.float64))
        z.flags.writeable = False
        object.__setattr__(self, "median_z", z)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MajorState)
            and self.node_id == other.node_id
            and self.episode_id == other.episode_id
            and self.cluster_id == other.cluster_id
            and np.array_equal(self.median_z, other.median_z)
            and self.thumbnail == other.thumbnail
            and (self.member_count, self.t_first, self.t_last)
            == (other.member_count, other.t_first, other.t_last)
        )


@dataclass(frozen=True)
class Transition:
    """A directed edge: consecutive visits aggregated into one counted link."""

    from_node: str
    to_node: str
    episode_id: str
    count: int
    first_order: int

    def __post_init__(self):
        if self.from_node == self.to_node:
            raise ValueError("self transitions are collapsed away, not stored")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class AbstractGraph:
    """Major states plus chronological transitions and per-episode visit orders."""

    nodes: tuple[MajorState, ...]
    edges: tuple[Transition, ...]
    trajectories: dict[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        ids = {n.node_id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ConsistencyError("duplicate node ids")
        for e in self.edges:
            if e.from_node not in ids or e.to_node not in ids:
                raise ConsistencyError(f"edge {e.from_node}->{e.to_node} references a missing node")
        for ep, visits in self.trajectories.items():
            for v in visits:
                if v not in ids:
                    raise ConsistencyError(f"trajectory {ep!r} visits missing node {v!r}")

    def node_by_id(self, node_id: str) -> MajorState:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


def median_latent(members: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise median; even counts average the two middle values."""
    if len(members) == 0:
        raise ValueError("median of an empty member set")
    stack = [np.asarray(m, dtype=np.float64) for m in members]
    dim = stack[0].shape
    if any(m.shape != dim or m.ndim != 1 for m in stack):
        raise ShapeError("member vectors must all be 1-d and the same length")
    return np.median(np.stack(stack), axis=0)


def node_id_for(episode_id: str, cluster_id: int) -> str:
    return f"{episode_id}#{cluster_id}"


def build_major_states(
    traj: LatentTrajectory, labeling: ClusterLabeling, params: VaeParams
) -> list[MajorState]:
    """One state per cluster: median latent over members, decoded thumbnail.

    Noise points contribute no state.
    """
    if len(labeling.labels) != len(traj):
        raise ValueError(
            f"labeling length {len(labeling.labels)} does not match trajectory length {len(traj)}"
        )
    states = []
    for k in range(labeling.n_clusters):
        members = labeling.members(k)
        med = median_latent([traj.points[i].z for i in members])
        states.append(
            MajorState(
                node_id=node_id_for(traj.episode_id, k),
                episode_id=traj.episode_id,
                cluster_id=k,
                median_z=med,
                thumbnail=decode(params, med),
                member_count=len(members),
                t_first=members[0],
                t_last=members[-1],
            )
        )
    return states


def collapse_visits(labels: Sequence[int]) -> list[int]:
    """Drop noise entries, then collapse runs of the same cluster id to one visit."""
    visits: list[int] = []
    for l in labels:
        if l == NOISE:
            continue
        if not visits or visits[-1] != l:
            visits.append(l)
    return visits


def build_graph(
    per_episode: Sequence[tuple[str, Sequence[int]]],
    states: Sequence[MajorState],
) -> AbstractGraph:
    """Assemble the graph from per-episode chronological labels (noise included).

    Per episode, noise entries are dropped (their neighbors become consecutive),
    runs collapse into single visits, and each consecutive visit pair becomes a
    directed edge; repeats of the same pair aggregate into a count.
    """
    by_key = {(s.episode_id, s.cluster_id): s for s in states}
    edges: list[Transition] = []
    trajectories: dict[str, tuple[str, ...]] = {}
    for episode_id, labels in per_episode:
        visits = collapse_visits(labels)
        for k in set(visits):
            if (episode_id, k) not in by_key:
                raise ConsistencyError(
                    f"episode {episode_id!r} visits cluster {k} but no state exists for it"
                )
        visit_ids = [by_key[(episode_id, k)].node_id for k in visits]
        trajectories[episode_id] = tuple(visit_ids)
        counted: dict[tuple[str, str], Transition] = {}
        for order, (a, b) in enumerate(zip(visit_ids, visit_ids[1:])):
            if (a, b) in counted:
                prev = counted[(a, b)]
                counted[(a, b)] = Transition(a, b, episode_id, prev.count + 1, prev.first_order)
            else:
                counted[(a, b)] = Transition(a, b, episode_id, 1, order)
        edges.extend(sorted(counted.values(), key=lambda e: e.first_order))
    return AbstractGraph(tuple(states), tuple(edges), trajectories)


def pca_project(points: Sequence[np.ndarray], k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project mean-centered points onto the top-k covariance eigenvectors.

    Returns (projections (n, k), components (k, d), explained_variance_ratio (k,)).
    Component signs are fixed so each component's first nonzero coordinate is
    positive, making the output deterministic.
    """
    x = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    n, dim = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 points")
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in 1..{dim}, got {k}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T[:k].copy()
    for row in components:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    total = float(eigvals.sum())
    ratio = eigvals[:k] / total if total > 0 else np.zeros(k)
    return centered @ components.T, components, ratio
