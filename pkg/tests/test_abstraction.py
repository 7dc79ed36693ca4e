import numpy as np
import pytest

from trajmap.abstraction import (
    AbstractGraph,
    MajorState,
    Transition,
    build_graph,
    build_major_states,
    collapse_visits,
    median_latent,
    pca_project,
)
from trajmap.clustering import NOISE, ClusterLabeling
from trajmap.episodes import LatentPoint, LatentTrajectory
from trajmap.errors import ConsistencyError, ShapeError
from trajmap.vae import VaeParams, decode, mlp_arch


def make_traj(vectors, episode_id="e"):
    pts = tuple(LatentPoint(episode_id, t, np.asarray(v, float)) for t, v in enumerate(vectors))
    return LatentTrajectory(episode_id, pts)


def tiny_params(latent_dim=2, frame=(2, 2, 1), seed=0):
    arch = mlp_arch(frame, latent_dim=latent_dim, hidden=4)
    rng = np.random.default_rng(seed)
    return VaeParams(
        arch,
        rng.normal(0, 0.3, arch.n_encoder_params),
        rng.normal(0, 0.3, arch.n_decoder_params),
    )


def make_state(episode_id, cluster_id, z=None, params=None):
    params = params or tiny_params()
    z = np.zeros(params.latent_dim) if z is None else np.asarray(z, float)
    return MajorState(
        node_id=f"{episode_id}#{cluster_id}",
        episode_id=episode_id,
        cluster_id=cluster_id,
        median_z=z,
        thumbnail=decode(params, z),
        member_count=1,
        t_first=0,
        t_last=0,
    )


# --- median ---


def test_median_componentwise():
    got = median_latent([np.array([1.0, 2.0]), np.array([3.0, 4.0]), np.array([5.0, 0.0])])
    assert np.array_equal(got, [3.0, 2.0])


def test_median_even_count_averages():
    assert np.array_equal(median_latent([np.array([0.0]), np.array([10.0])]), [5.0])


def test_median_single_vector_identity():
    v = np.array([7.0, -1.0, 2.5])
    assert np.array_equal(median_latent([v]), v)


def test_median_rejects_empty_and_ragged():
    with pytest.raises(ValueError):
        median_latent([])
    with pytest.raises(ShapeError):
        median_latent([np.zeros(2), np.zeros(3)])


def test_median_within_member_bounds():
    rng = np.random.default_rng(0)
    for _ in range(30):
        members = [rng.normal(0, 2, 4) for _ in range(int(rng.integers(1, 9)))]
        med = median_latent(members)
        stack = np.stack(members)
        assert np.all(med >= stack.min(axis=0) - 1e-12)
        assert np.all(med <= stack.max(axis=0) + 1e-12)


# --- major states ---


def test_build_major_states_all_noise_gives_empty():
    traj = make_traj([[0.0, 0.0]] * 3)
    labeling = ClusterLabeling((NOISE, NOISE, NOISE), 0)
    assert build_major_states(traj, labeling, tiny_params()) == []


def test_build_major_states_single_cluster_median():
    params = tiny_params()
    traj = make_traj([[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]])
    labeling = ClusterLabeling((0, 0, 0), 1)
    (state,) = build_major_states(traj, labeling, params)
    assert state.node_id == "e#0"
    assert np.array_equal(state.median_z, [3.0, 2.0])
    assert state.member_count == 3
    assert (state.t_first, state.t_last) == (0, 2)
    assert state.thumbnail == decode(params, np.array([3.0, 2.0]))


def test_build_major_states_partitions_members():
    params = tiny_params()
    traj = make_traj([[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0], [5.0, 5.0]])
    labeling = ClusterLabeling((0, 0, 1, 1, NOISE), 2)
    states = build_major_states(traj, labeling, params)
    assert len(states) == 2
    assert states[0].member_count + states[1].member_count == 4
    assert states[0].cluster_id == 0 and states[1].cluster_id == 1
    with pytest.raises(ValueError):
        build_major_states(traj, ClusterLabeling((0,), 1), params)


# --- graph building ---


def test_collapse_basic_runs():
    assert collapse_visits([0, 0, 1, 1, 2]) == [0, 1, 2]


def test_build_graph_collapse_rule():
    params = tiny_params()
    states = [make_state("e", k, params=params) for k in range(3)]
    g = build_graph([("e", [0, 0, 1, 1, 2])], states)
    assert g.trajectories["e"] == ("e#0", "e#1", "e#2")
    assert [(e.from_node, e.to_node, e.count) for e in g.edges] == [
        ("e#0", "e#1", 1),
        ("e#1", "e#2", 1),
    ]


def test_build_graph_revisit_cycle():
    params = tiny_params()
    states = [make_state("e", k, params=params) for k in range(2)]
    g = build_graph([("e", [0, 1, 0])], states)
    assert g.trajectories["e"] == ("e#0", "e#1", "e#0")
    assert [(e.from_node, e.to_node) for e in g.edges] == [("e#0", "e#1"), ("e#1", "e#0")]
    assert len(g.nodes) == 2


def test_build_graph_noise_skipped():
    params = tiny_params()
    states = [make_state("e", k, params=params) for k in range(2)]
    g = build_graph([("e", [0, NOISE, 1])], states)
    assert g.trajectories["e"] == ("e#0", "e#1")
    assert [(e.from_node, e.to_node) for e in g.edges] == [("e#0", "e#1")]
    # noise between repeats of the same cluster merges the visit
    g2 = build_graph([("e", [0, NOISE, 0, 1])], states)
    assert g2.trajectories["e"] == ("e#0", "e#1")


def test_build_graph_aggregates_repeats():
    params = tiny_params()
    states = [make_state("e", k, params=params) for k in range(2)]
    g = build_graph([("e", [0, 1, 0, 1])], states)
    ab = [e for e in g.edges if e.from_node == "e#0"][0]
    ba = [e for e in g.edges if e.from_node == "e#1"][0]
    assert ab.count == 2 and ba.count == 1
    assert ab.first_order == 0 and ba.first_order == 1


def test_build_graph_unknown_cluster_raises():
    states = [make_state("e", 0)]
    with pytest.raises(ConsistencyError):
        build_graph([("e", [0, 1])], states)


def test_build_graph_collapse_idempotent():
    params = tiny_params()
    states = [make_state("e", k, params=params) for k in range(3)]
    once = build_graph([("e", [0, 0, 1, 2, 2])], states)
    visits = [int(v.split("#")[1]) for v in once.trajectories["e"]]
    twice = build_graph([("e", visits)], states)
    assert once.trajectories == twice.trajectories
    assert once.edges == twice.edges


def test_graph_edges_match_trajectories():
    rng = np.random.default_rng(3)
    params = tiny_params()
    for _ in range(20):
        n_clusters = int(rng.integers(1, 5))
        states = [make_state("e", k, z=rng.normal(0, 1, 2), params=params) for k in range(n_clusters)]
        labels = [int(v) for v in rng.integers(-1, n_clusters, size=30)]
        if all(l == NOISE for l in labels):
            labels[0] = 0
        g = build_graph([("e", labels)], states)
        rebuilt = {}
        visits = g.trajectories["e"]
        for a, b in zip(visits, visits[1:]):
            rebuilt[(a, b)] = rebuilt.get((a, b), 0) + 1
        from_edges = {(e.from_node, e.to_node): e.count for e in g.edges}
        assert rebuilt == from_edges


def test_graph_rejects_broken_references():
    s = make_state("e", 0)
    with pytest.raises(ConsistencyError):
        AbstractGraph((s,), (Transition("e#0", "e#9", "e", 1, 0),), {})
    with pytest.raises(ConsistencyError):
        AbstractGraph((s,), (), {"e": ("e#9",)})


# --- PCA ---


def test_pca_collinear_rank1():
    pts = [t * np.array([1.0, 2.0, 2.0]) for t in (-1.0, 0.0, 1.0)]
    _, comps, ratio = pca_project(pts, 1)
    assert ratio.shape == (1,)
    assert abs(ratio[0] - 1.0) < 1e-12
    expected = np.array([1.0, 2.0, 2.0]) / 3.0
    assert np.allclose(np.abs(comps[0]), expected)


def test_pca_axis_aligned_pair():
    proj, comps, _ = pca_project([np.array([1.0, 0.0]), np.array([-1.0, 0.0])], 1)
    assert np.allclose(comps[0], [1.0, 0.0])
    assert np.allclose(proj.ravel(), [1.0, -1.0])


def test_pca_rank2_in_8d():
    rng = np.random.default_rng(11)
    basis = np.linalg.qr(rng.normal(0, 1, (8, 2)))[0].T
    coeffs = rng.normal(0, 1, (20, 2)) * np.array([3.0, 1.0])
    pts = list(coeffs @ basis)
    proj, comps, ratio = pca_project(pts, 2)
    assert float(ratio.sum()) >= 0.999
    # oracle: singular values of the centered data give the same subspace energy
    x = np.stack(pts)
    x -= x.mean(axis=0)
    sv = np.linalg.svd(x, compute_uv=False)
    assert abs(ratio.sum() - (sv[:2] ** 2).sum() / (sv**2).sum()) < 1e-9


def test_pca_orthonormal_components_and_variances():
    rng = np.random.default_rng(12)
    pts = [rng.normal(0, 1, 6) for _ in range(40)]
    proj, comps, ratio = pca_project(pts, 4)
    gram = comps @ comps.T
    assert np.max(np.abs(gram - np.eye(4))) < 1e-9
    x = np.stack(pts)
    x -= x.mean(axis=0)
    eigvals = np.sort(np.linalg.eigvalsh(x.T @ x / (len(pts) - 1)))[::-1]
    emp = proj.var(axis=0, ddof=1)
    assert np.max(np.abs(emp - eigvals[:4]) / eigvals[:4]) < 1e-6
    # deterministic sign: first nonzero coordinate positive
    for row in comps:
        nz = row[np.abs(row) > 1e-12]
        assert nz[0] > 0


def test_pca_rejects_bad_k():
    pts = [np.zeros(3), np.ones(3)]
    with pytest.raises(ValueError):
        pca_project(pts, 0)
    with pytest.raises(ValueError):
        pca_project(pts, 4)
    with pytest.raises(ValueError):
        pca_project([np.zeros(3)], 1)
