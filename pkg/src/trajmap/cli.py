"""Command-line entry point: synthesize demo data, train a model, run the
abstraction pipeline, and serve the result."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import clustering, episodes, layout, service, vae


def _add_cluster_flags(sub):
    sub.add_argument("--eps-spatial", type=float, default=None, help="latent-space radius")
    sub.add_argument("--eps-temporal", type=float, default=None, help="frame-index radius")
    sub.add_argument("--min-pts", type=int, default=None, help="neighborhood size threshold")


def _add_layout_flags(sub):
    sub.add_argument("--layout-iterations", type=int, default=None, help="force simulation steps")


def _add_train_flags(sub):
    sub.add_argument("--latent-dim", type=int, default=8)
    sub.add_argument("--hidden", type=int, default=128, help="hidden width of the MLP preset")
    sub.add_argument("--arch", choices=["mlp", "conv32"], default="mlp")
    sub.add_argument("--beta", type=float, default=4.0)
    sub.add_argument("--epochs", type=int, default=200)
    sub.add_argument("--batch-size", type=int, default=32)
    sub.add_argument("--lr", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajmap")
    parser.add_argument("--seed", type=int, default=42, help="seed threaded through every stage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic moving-dot dataset and manifest")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=3)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--segments", type=int, default=3)

    p = sub.add_parser("train", help="train a model on every frame in a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True, help="output model path")
    _add_train_flags(p)

    p = sub.add_parser("abstract", help="encode, cluster, build the graph, lay it out, export")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--application", default="episodes")
    _add_cluster_flags(p)
    _add_layout_flags(p)

    p = sub.add_parser("serve", help="serve an exported directory over HTTP")
    p.add_argument("--out", type=Path, required=True, help="exported directory")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--ui", type=Path, default=None, help="explorer UI bundle directory")

    p = sub.add_parser("all", help="train then abstract (and serve when --bind is given)")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--application", default="episodes")
    p.add_argument("--bind", default=None)
    p.add_argument("--ui", type=Path, default=None)
    _add_train_flags(p)
    _add_cluster_flags(p)
    _add_layout_flags(p)
    return parser


def _cluster_params(args) -> clustering.StParams | None:
    given = [args.eps_spatial, args.eps_temporal, args.min_pts]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise SystemExit("--eps-spatial, --eps-temporal and --min-pts must be given together")
    return clustering.StParams(args.eps_spatial, args.eps_temporal, args.min_pts)


def _layout_params(args, seed: int) -> layout.LayoutParams | None:
    if args.layout_iterations is None:
        return None
    return layout.LayoutParams(iterations=args.layout_iterations, rng_seed=seed)


def cmd_synth(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.episodes):
        ep = episodes.synth_moving_dot(args.frames, args.side, seed=args.seed + i, n_segments=args.segments)
        raw = np.stack([np.rint(f.pixels * 255).astype(np.uint8) for f in ep.frames])
        name = f"episode{i}.frames"
        episodes.write_frames_file(args.out / name, raw)
        entries.append({"id": f"dot{i}", "agent": f"agent{i}", "frames": name})
    manifest = args.out / "manifest.json"
    manifest.write_text(json.dumps({"episodes": entries}, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(entries)} episodes and {manifest}")
    return 0


def _train_model(args, manifest: Path) -> tuple[vae.VaeParams, list[vae.LossBreakdown]]:
    eps = episodes.load_episodes(manifest)
    if not eps:
        raise SystemExit("manifest lists no episodes; nothing to train on")
    dataset = [f for e in eps for f in e.frames]
    shape = dataset[0].shape
    if args.arch == "conv32":
        arch = vae.conv32_arch(args.latent_dim)
    else:
        arch = vae.mlp_arch(shape, args.latent_dim, hidden=args.hidden)
    cfg = vae.TrainConfig(
        beta=args.beta,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        rng_seed=args.seed,
    )
    params, history = vae.train(dataset, cfg, arch)
    print(f"epoch 1 mean loss {history[0].total:.3f} -> epoch {len(history)} mean loss {history[-1].total:.3f}")
    return params, history


def cmd_train(args) -> int:
    params, _ = _train_model(args, args.manifest)
    args.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    vae.save_checkpoint(params, args.checkpoint)
    print(f"saved checkpoint to {args.checkpoint}")
    return 0


def cmd_abstract(args) -> int:
    cfg = service.PipelineConfig(
        manifest=args.manifest,
        out_dir=args.out,
        checkpoint=args.checkpoint,
        cluster=_cluster_params(args),
        layout_params=_layout_params(args, args.seed),
        application=args.application,
        seed=args.seed,
    )
    doc = service.run_pipeline(cfg)
    print(f"exported {len(doc.nodes)} nodes and {len(doc.edges)} edges to {args.out}")
    return 0


def cmd_serve(args) -> int:
    service.serve(args.out, args.bind, args.ui)
    return 0


def cmd_all(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    params, _ = _train_model(args, args.manifest)
    checkpoint = args.out / "model.bvae"
    vae.save_checkpoint(params, checkpoint)
    args.checkpoint = checkpoint
    cmd_abstract(args)
    if args.bind:
        service.serve(args.out, args.bind, args.ui)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "train": cmd_train,
        "abstract": cmd_abstract,
        "serve": cmd_serve,
        "all": cmd_all,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
