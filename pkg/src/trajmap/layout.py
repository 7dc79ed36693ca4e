"""Deterministic force-directed 2D layout of the abstract graph. Link strength
falls off with the latent-space distance between the linked states, so states
that look alike end up near each other regardless of which episode owns them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .abstraction import AbstractGraph


@dataclass(frozen=True)
class LayoutParams:
    iterations: int = 3000
    initial_step: float = 0.05
    repulsion_k: float = 1.0
    spring_k: float = 1.0
    rest_length_scale: float = 30.0
    similarity_radius: float = 0.0
    centering_k: float = 0.01
    rng_seed: int = 42

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        gains = (
            self.initial_step,
            self.repulsion_k,
            self.spring_k,
            self.rest_length_scale,
            self.similarity_radius,
            self.centering_k,
        )
        if not all(math.isfinite(g) and g >= 0 for g in gains):
            raise ValueError("layout gains must be finite and nonnegative")
        if self.initial_step <= 0 or self.rest_length_scale <= 0:
            raise ValueError("initial_step and rest_length_scale must be positive")


@dataclass(frozen=True)
class NodePosition:
    node_id: str
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("positions must be finite")


@dataclass(frozen=True)
class ForceLink:
    node_a: int  # indices into graph.nodes
    node_b: int
    strength: float
    rest_length: float


def link_strength(d: float) -> float:
    """Attraction weight for a latent distance d: 1/(1+d), decreasing in d."""
    if d < 0:
        raise ValueError("distance must be nonnegative")
    return 1.0 / (1.0 + d)


def _pair_distances(graph: AbstractGraph) -> np.ndarray:
    z = np.stack([n.median_z for n in graph.nodes])
    sq = np.sum(z**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (z @ z.T), 0.0)
    return np.sqrt(d2)


def build_force_links(graph: AbstractGraph, p: LayoutParams) -> list[ForceLink]:
    """One link per undirected graph edge, plus similarity links between any
    remaining node pair whose latent distance is within similarity_radius."""
    index = {n.node_id: i for i, n in enumerate(graph.nodes)}
    dist = _pair_distances(graph) if graph.nodes else np.zeros((0, 0))
    links: list[ForceLink] = []
    seen: set[tuple[int, int]] = set()
    for e in graph.edges:
        a, b = index[e.from_node], index[e.to_node]
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        d = float(dist[a, b])
        links.append(ForceLink(key[0], key[1], link_strength(d), p.rest_length_scale * (1.0 + d)))
    n = len(graph.nodes)
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) in seen:
                continue
            d = float(dist[a, b])
            if d <= p.similarity_radius:
                links.append(ForceLink(a, b, link_strength(d), p.rest_length_scale * (1.0 + d)))
    return links


def default_layout_params(graph: AbstractGraph, **overrides) -> LayoutParams:
    """Standard gains with similarity_radius set to the 25th percentile of the
    graph's pairwise node latent distances."""
    if len(graph.nodes) >= 2:
        dist = _pair_distances(graph)
        upper = dist[np.triu_indices(len(graph.nodes), k=1)]
        radius = float(np.percentile(upper, 25))
    else:
        radius = 0.0
    return replace(LayoutParams(similarity_radius=radius), **overrides)


def simulate(
    graph: AbstractGraph,
    p: LayoutParams,
    initial: Sequence[tuple[float, float]] | None = None,
) -> list[NodePosition]:
    """Run the force simulation and return final positions, one per graph node.

    Per step: pairwise repulsion repulsion_k/d^2 (d floored at 0.01), spring
    force spring_k * strength * (d - rest_length) along every link, and a
    centering pull -centering_k * position; displacements scale with a step
    size decaying linearly from initial_step to 0. Deterministic per seed.
    `initial` overrides the seeded jittered-circle start (used by tests).
    """
    n = len(graph.nodes)
    if n == 0:
        raise ValueError("cannot lay out an empty graph")

    if initial is not None:
        pos = np.array(initial, dtype=np.float64)
        if pos.shape != (n, 2):
            raise ValueError(f"initial positions must have shape ({n}, 2)")
        pos = pos.copy()
    else:
        rng = np.random.default_rng(p.rng_seed)
        radius = p.rest_length_scale * max(1.0, math.sqrt(n))
        angles = 2.0 * math.pi * np.arange(n) / n
        pos = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        pos += rng.uniform(-0.05 * radius, 0.05 * radius, size=(n, 2))

    links = build_force_links(graph, p)
    la = np.array([l.node_a for l in links], dtype=np.int64)
    lb = np.array([l.node_b for l in links], dtype=np.int64)
    ls = np.array([l.strength for l in links])
    lr = np.array([l.rest_length for l in links])

    d_floor = 0.01
    for it in range(p.iterations):
        step = p.initial_step * (1.0 - it / p.iterations)
        force = np.zeros_like(pos)
        if p.repulsion_k > 0.0 and n > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            d = np.sqrt(np.sum(diff**2, axis=2))
            np.fill_diagonal(d, np.inf)
            d = np.maximum(d, d_floor)
            force += np.sum(p.repulsion_k * diff / d[..., None] ** 3, axis=1)
        if la.size:
            delta = pos[lb] - pos[la]
            d = np.maximum(np.sqrt(np.sum(delta**2, axis=1)), d_floor)
            f = (p.spring_k * ls * (d - lr) / d)[:, None] * delta
            np.add.at(force, la, f)
            np.add.at(force, lb, -f)
        if p.centering_k > 0.0:
            force -= p.centering_k * pos
        pos += step * force

    return [
        NodePosition(node.node_id, float(pos[i, 0]), float(pos[i, 1]))
        for i, node in enumerate(graph.nodes)
    ]
