#!/usr/bin/env python3
"""Build a small deterministic exported document for explorer tests."""

import sys
from pathlib import Path

import numpy as np

from trajmap import decode, init_params, mlp_arch
from trajmap.abstraction import AbstractGraph, MajorState, Transition
from trajmap.layout import LayoutParams, simulate
from trajmap.service import (
    GraphDocument,
    GraphEdge,
    GraphNode,
    TrajectoryEntry,
    export_document,
)


def main(out_dir: str) -> None:
    params = init_params(mlp_arch((12, 12, 1), latent_dim=2, hidden=16), 7)
    rng = np.random.default_rng(7)

    def state(episode, k, z):
        z = np.asarray(z, float)
        return MajorState(
            node_id=f"{episode}#{k}",
            episode_id=episode,
            cluster_id=k,
            median_z=z,
            thumbnail=decode(params, z),
            member_count=int(rng.integers(3, 30)),
            t_first=k * 10,
            t_last=k * 10 + 9,
        )

    states = [
        state("epA", 0, [0.0, 0.0]),
        state("epA", 1, [2.0, 0.5]),
        state("epA", 2, [3.5, -1.0]),
        state("epB", 0, [0.5, 2.0]),
        state("epB", 1, [2.5, 2.5]),
    ]
    visits = {"epA": [0, 1, 2], "epB": [0, 1, 0]}
    graph = AbstractGraph(
        tuple(states),
        (
            Transition("epA#0", "epA#1", "epA", 1, 0),
            Transition("epA#1", "epA#2", "epA", 1, 1),
            Transition("epB#0", "epB#1", "epB", 1, 0),
            Transition("epB#1", "epB#0", "epB", 1, 1),
        ),
        {ep: tuple(f"{ep}#{k}" for k in v) for ep, v in visits.items()},
    )
    positions = {p.node_id: p for p in simulate(graph, LayoutParams(iterations=400, similarity_radius=2.0))}

    doc = GraphDocument(
        application="fixture",
        nodes=tuple(
            GraphNode(
                node_id=s.node_id,
                episode_id=s.episode_id,
                cluster_id=s.cluster_id,
                x=positions[s.node_id].x,
                y=positions[s.node_id].y,
                member_count=s.member_count,
                t_first=s.t_first,
                t_last=s.t_last,
                thumbnail_ref=f"thumbs/{s.node_id}.pgm",
            )
            for s in states
        ),
        edges=tuple(GraphEdge(e.from_node, e.to_node, e.episode_id, e.count) for e in graph.edges),
        trajectories={
            "epA": TrajectoryEntry("agent-alpha", graph.trajectories["epA"], 0),
            "epB": TrajectoryEntry("agent-beta", graph.trajectories["epB"], 1),
        },
    )
    export_document(doc, Path(out_dir), {s.node_id: s.thumbnail for s in states})
    print(out_dir)


if __name__ == "__main__":
    main(sys.argv[1])
