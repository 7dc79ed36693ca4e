"""End-to-end pipeline orchestration, document serialization and the read-only
HTTP service that feeds the browser explorer."""

from __future__ import annotations

import io
import json
import logging
import mimetypes
import re
import threading
from dataclasses import asdict, dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote

import numpy as np

from . import abstraction, clustering, episodes, layout, vae
from .errors import ConsistencyError, FormatError, PipelineError

log = logging.getLogger("trajmap")

SCHEMA_VERSION = 1
_ID_RE = re.compile(r"^[A-Za-z0-9#_-]+$")


@dataclass(frozen=True)
class GraphNode:
    node_id: str
    episode_id: str
    cluster_id: int
    x: float
    y: float
    member_count: int
    t_first: int
    t_last: int
    thumbnail_ref: str


@dataclass(frozen=True)
class GraphEdge:
    from_node: str
    to_node: str
    episode_id: str
    count: int


@dataclass(frozen=True)
class TrajectoryEntry:
    agent_label: str
    node_ids: tuple[str, ...]
    display_color_index: int


@dataclass(frozen=True)
class GraphDocument:
    """The serialized contract between the pipeline and the explorer UI."""

    application: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    trajectories: dict[str, TrajectoryEntry]
    schema_version: int = SCHEMA_VERSION


def validate_document(doc: GraphDocument) -> None:
    """Check referential integrity, id charset, and coordinate sanity."""
    if doc.schema_version != SCHEMA_VERSION:
        raise ConsistencyError(f"unsupported schema_version {doc.schema_version}")
    ids = set()
    for n in doc.nodes:
        if not _ID_RE.match(n.node_id):
            raise ConsistencyError(f"node id {n.node_id!r} contains characters outside [A-Za-z0-9#_-]")
        if n.node_id in ids:
            raise ConsistencyError(f"duplicate node id {n.node_id!r}")
        ids.add(n.node_id)
        if not (np.isfinite(n.x) and np.isfinite(n.y)):
            raise ConsistencyError(f"node {n.node_id!r} has non-finite coordinates")
    for e in doc.edges:
        if e.from_node not in ids or e.to_node not in ids:
            raise ConsistencyError(f"edge {e.from_node}->{e.to_node} references a missing node")
    for ep, entry in doc.trajectories.items():
        for v in entry.node_ids:
            if v not in ids:
                raise ConsistencyError(f"trajectory {ep!r} references missing node {v!r}")


def document_to_json(doc: GraphDocument) -> str:
    payload = {
        "schema_version": doc.schema_version,
        "application": doc.application,
        "nodes": [asdict(n) for n in doc.nodes],
        "edges": [asdict(e) for e in doc.edges],
        "trajectories": {
            ep: {
                "agent_label": t.agent_label,
                "node_ids": list(t.node_ids),
                "display_color_index": t.display_color_index,
            }
            for ep, t in doc.trajectories.items()
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def document_from_json(text: str) -> GraphDocument:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid document JSON: {exc}") from exc
    try:
        nodes = tuple(GraphNode(**n) for n in payload["nodes"])
        edges = tuple(GraphEdge(**e) for e in payload["edges"])
        trajectories = {
            ep: TrajectoryEntry(t["agent_label"], tuple(t["node_ids"]), t["display_color_index"])
            for ep, t in payload["trajectories"].items()
        }
        doc = GraphDocument(
            application=payload["application"],
            nodes=nodes,
            edges=edges,
            trajectories=trajectories,
            schema_version=payload["schema_version"],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"document JSON missing fields: {exc}") from exc
    validate_document(doc)
    return doc


# --- thumbnails ---------------------------------------------------------------


def frame_to_pgm(frame: vae.Frame) -> bytes:
    """Binary 8-bit PGM; multi-channel frames are averaged to grayscale."""
    gray = frame.pixels.mean(axis=2) if frame.channels > 1 else frame.pixels[:, :, 0]
    u8 = np.rint(gray * 255.0).astype(np.uint8)
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + u8.tobytes()


# --- export -------------------------------------------------------------------


def export_document(doc: GraphDocument, out_dir: str | Path, thumbnails: dict[str, vae.Frame]) -> Path:
    """Write graph.json plus thumbs/<node_id>.pgm; returns the graph.json path."""
    validate_document(doc)
    missing = [n.node_id for n in doc.nodes if n.node_id not in thumbnails]
    if missing:
        raise ConsistencyError(f"missing thumbnails for nodes: {missing}")
    out_dir = Path(out_dir)
    (out_dir / "thumbs").mkdir(parents=True, exist_ok=True)
    for n in doc.nodes:
        (out_dir / "thumbs" / f"{n.node_id}.pgm").write_bytes(frame_to_pgm(thumbnails[n.node_id]))
    graph_path = out_dir / "graph.json"
    graph_path.write_text(document_to_json(doc), encoding="utf-8")
    return graph_path


def load_document(out_dir: str | Path) -> GraphDocument:
    return document_from_json((Path(out_dir) / "graph.json").read_text(encoding="utf-8"))


# --- pipeline -----------------------------------------------------------------


@dataclass
class PipelineConfig:
    manifest: Path
    out_dir: Path
    checkpoint: Path | None = None
    train: vae.TrainConfig | None = None
    arch: vae.Architecture | None = None
    cluster: clustering.StParams | None = None
    layout_params: layout.LayoutParams | None = None
    application: str = "episodes"
    seed: int = 42


def _stage(name: str):
    class _StageGuard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, exc) from exc
            return False

    return _StageGuard()


def run_pipeline(cfg: PipelineConfig) -> GraphDocument:
    """Load -> encode -> cluster -> abstract -> lay out -> export.

    Every stage is seeded from cfg, so repeated runs produce byte-identical
    exports. Episodes whose labeling is entirely noise keep an empty
    trajectory entry and log a warning rather than failing the run.
    """
    with _stage("load-episodes"):
        eps = episodes.load_episodes(cfg.manifest)

    params = None
    if cfg.checkpoint is not None:
        with _stage("load-checkpoint"):
            params = vae.load_checkpoint(cfg.checkpoint)
    elif eps:
        with _stage("train"):
            train_cfg = cfg.train or vae.TrainConfig(beta=4.0, epochs=50, rng_seed=cfg.seed)
            dataset = [f for e in eps for f in e.frames]
            params, _ = vae.train(dataset, train_cfg, cfg.arch)

    states: list[abstraction.MajorState] = []
    per_episode: list[tuple[str, tuple[int, ...]]] = []
    if eps:
        with _stage("encode"):
            trajs = [episodes.encode_episode(params, e) for e in eps]
        with _stage("cluster"):
            labelings = []
            for traj in trajs:
                p = cfg.cluster or clustering.default_params(traj, seed=cfg.seed)
                labelings.append(clustering.st_dbscan(traj, p))
        with _stage("abstract"):
            for traj, labeling in zip(trajs, labelings):
                if labeling.n_clusters == 0:
                    log.warning("episode %r: all points are noise; empty trajectory", traj.episode_id)
                states_for = abstraction.build_major_states(traj, labeling, params)
                states.extend(states_for)
                per_episode.append((traj.episode_id, labeling.labels))
            graph = abstraction.build_graph(per_episode, states)
    else:
        log.warning("manifest lists no episodes; exporting an empty document")
        graph = abstraction.AbstractGraph((), (), {})

    with _stage("layout"):
        if graph.nodes:
            lp = cfg.layout_params or layout.default_layout_params(graph, rng_seed=cfg.seed)
            positions = {p.node_id: p for p in layout.simulate(graph, lp)}
        else:
            positions = {}

    with _stage("assemble"):
        nodes = tuple(
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
            for s in graph.nodes
        )
        edges = tuple(GraphEdge(e.from_node, e.to_node, e.episode_id, e.count) for e in graph.edges)
        trajectories = {
            e.episode_id: TrajectoryEntry(
                agent_label=e.agent_label,
                node_ids=graph.trajectories.get(e.episode_id, ()),
                display_color_index=i,
            )
            for i, e in enumerate(eps)
        }
        doc = GraphDocument(cfg.application, nodes, edges, trajectories)
        validate_document(doc)

    with _stage("export"):
        thumbnails = {s.node_id: s.thumbnail for s in graph.nodes}
        export_document(doc, cfg.out_dir, thumbnails)
        if cfg.checkpoint is None and params is not None:
            vae.save_checkpoint(params, Path(cfg.out_dir) / "model.bvae")
    return doc


# --- HTTP service -------------------------------------------------------------


class _ExplorerHandler(BaseHTTPRequestHandler):
    server_version = "trajmap/0.1"
    data_dir: Path
    ui_dir: Path | None

    def log_message(self, fmt, *args):  # keep request noise out of stdout
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _not_found(self) -> None:
        self._reply(404, b"not found\n", "text/plain; charset=utf-8")

    def _method_not_allowed(self) -> None:
        self.send_response(405)
        self.send_header("Allow", "GET, HEAD")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self):
        self._method_not_allowed()

    do_PUT = do_DELETE = do_PATCH = do_POST

    def do_HEAD(self):
        self.do_GET()

    def do_GET(self):
        path = unquote(self.path.split("?", 1)[0])
        if path == "/api/graph":
            return self._serve_file(self.data_dir / "graph.json", "application/json")
        if path == "/api/trajectories":
            return self._serve_trajectories()
        m = re.match(r"^/api/nodes/([^/]+)/image$", path)
        if m:
            return self._serve_image(m.group(1))
        if path.startswith("/api/"):
            return self._not_found()
        return self._serve_static(path)

    def _serve_file(self, path: Path, content_type: str) -> None:
        try:
            body = path.read_bytes()
        except OSError:
            return self._not_found()
        self._reply(200, body, content_type)

    def _serve_trajectories(self) -> None:
        try:
            payload = json.loads((self.data_dir / "graph.json").read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return self._not_found()
        body = json.dumps(payload.get("trajectories", {}), sort_keys=True, indent=2) + "\n"
        self._reply(200, body.encode("utf-8"), "application/json")

    def _serve_image(self, node_id: str) -> None:
        if not _ID_RE.match(node_id):
            return self._not_found()
        path = self.data_dir / "thumbs" / f"{node_id}.pgm"
        try:
            pgm = path.read_bytes()
        except OSError:
            return self._not_found()
        if "image/png" in self.headers.get("Accept", ""):
            from PIL import Image

            buf = io.BytesIO()
            Image.open(io.BytesIO(pgm)).save(buf, format="PNG")
            return self._reply(200, buf.getvalue(), "image/png")
        self._reply(200, pgm, "image/x-portable-graymap")

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            if path == "/":
                body = (
                    b"<!doctype html><title>trajmap</title><p>No UI bundle configured. "
                    b"API: /api/graph, /api/trajectories, /api/nodes/&lt;id&gt;/image</p>\n"
                )
                return self._reply(200, body, "text/html; charset=utf-8")
            return self._not_found()
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not target.is_relative_to(self.ui_dir.resolve()) or not target.is_file():
            return self._not_found()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._serve_file(target, ctype)


def make_server(
    out_dir: str | Path, bind_addr: str = "127.0.0.1:8000", ui_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    """Build (but do not start) the read-only HTTP server for an exported dir."""
    out_dir = Path(out_dir)
    if not (out_dir / "graph.json").is_file():
        raise FileNotFoundError(f"{out_dir} does not contain an exported graph.json")
    host, _, port = bind_addr.rpartition(":")
    handler = type(
        "BoundExplorerHandler",
        (_ExplorerHandler,),
        {"data_dir": out_dir, "ui_dir": Path(ui_dir) if ui_dir else None},
    )
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)


def serve(out_dir: str | Path, bind_addr: str, ui_dir: str | Path | None = None) -> None:
    """Serve an exported directory until interrupted."""
    server = make_server(out_dir, bind_addr, ui_dir)
    host, port = server.server_address[:2]
    log.info("serving %s on http://%s:%d/", out_dir, host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
