import json

import numpy as np
import pytest

from trajmap import (
    PipelineConfig,
    TrainConfig,
    mlp_arch,
    run_pipeline,
    save_checkpoint,
    synth_moving_dot,
    train,
    write_frames_file,
)

PLATEAU_SEED = 42
PLATEAU_TRAIN = TrainConfig(beta=4.0, learning_rate=1e-3, epochs=200, batch_size=32, rng_seed=PLATEAU_SEED)


def episode_to_frames_u8(ep):
    return np.stack([np.rint(f.pixels * 255).astype(np.uint8) for f in ep.frames])


def write_manifest(directory, entries):
    path = directory / "manifest.json"
    path.write_text(json.dumps({"episodes": entries}, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def plateau_training():
    """Model trained on the planted 3-plateau episode (slow; shared across tests)."""
    ep = synth_moving_dot(300, 16, seed=PLATEAU_SEED, n_segments=3)
    arch = mlp_arch((16, 16, 1), latent_dim=4, hidden=128)
    params, history = train(list(ep.frames), PLATEAU_TRAIN, arch)
    return ep, arch, params, history


@pytest.fixture(scope="session")
def plateau_export(plateau_training, tmp_path_factory):
    """Full pipeline run over the plateau episode, exported to disk."""
    ep, _, params, _ = plateau_training
    root = tmp_path_factory.mktemp("plateau")
    data_dir = root / "data"
    data_dir.mkdir()
    write_frames_file(data_dir / "ep.frames", episode_to_frames_u8(ep))
    manifest = write_manifest(data_dir, [{"id": "dot0", "agent": "synthetic", "frames": "ep.frames"}])
    checkpoint = root / "model.bvae"
    save_checkpoint(params, checkpoint)
    cfg = PipelineConfig(
        manifest=manifest,
        out_dir=root / "out",
        checkpoint=checkpoint,
        application="moving-dot",
        seed=PLATEAU_SEED,
    )
    doc = run_pipeline(cfg)
    return doc, cfg, params
