/** Pure scene builders: turn (document, view state, canvas size) into plain
 * drawing descriptions. The canvas painter consumes these; tests assert on
 * them directly without a DOM. */

import {
  GraphDocument,
  GraphNode,
  ViewState,
  trajectoryColor,
} from "./types.js";

export type Emphasis = "normal" | "highlighted" | "dimmed";

export interface MapSceneNode {
  nodeId: string;
  episodeId: string;
  x: number;
  y: number;
  radius: number;
  color: string;
  emphasis: Emphasis;
  hovered: boolean;
}

export interface EdgePath {
  x0: number;
  y0: number;
  cx: number;
  cy: number;
  x1: number;
  y1: number;
}

export interface MapSceneEdge {
  fromNode: string;
  toNode: string;
  episodeId: string;
  count: number;
  color: string;
  emphasis: Emphasis;
  path: EdgePath;
  /** Position of the animated flow dot at the current animation phase. */
  dot: { x: number; y: number };
}

export interface MapScene {
  nodes: MapSceneNode[];
  edges: MapSceneEdge[];
}

export interface SliderItem {
  nodeId: string;
  episodeId: string;
  /** Position in the trajectory's visit order. */
  order: number;
}

export interface SliderGroup {
  episodeId: string;
  agentLabel: string;
  color: string;
  highlighted: boolean;
  items: SliderItem[];
}

export interface InspectorContent {
  nodeId: string;
  episodeId: string;
  memberCount: number;
  tFirst: number;
  tLast: number;
}

export const NODE_RADIUS = 16;

/** Chord-relative perpendicular offset of the curve control point. */
export const EDGE_CURVATURE = 0.15;

export function docToScreen(
  vs: ViewState,
  width: number,
  height: number,
  x: number,
  y: number,
): { x: number; y: number } {
  return {
    x: (x + vs.pan.x) * vs.zoom + width / 2,
    y: (y + vs.pan.y) * vs.zoom + height / 2,
  };
}

export function screenToDoc(
  vs: ViewState,
  width: number,
  height: number,
  sx: number,
  sy: number,
): { x: number; y: number } {
  return {
    x: (sx - width / 2) / vs.zoom - vs.pan.x,
    y: (sy - height / 2) / vs.zoom - vs.pan.y,
  };
}

function emphasisFor(vs: ViewState, episodeId: string): Emphasis {
  if (vs.highlightedTrajectory === null) return "normal";
  return vs.highlightedTrajectory === episodeId ? "highlighted" : "dimmed";
}

function colorFor(doc: GraphDocument, episodeId: string): string {
  const entry = doc.trajectories[episodeId];
  return trajectoryColor(entry ? entry.display_color_index : 0);
}

export function edgePath(x0: number, y0: number, x1: number, y1: number): EdgePath {
  const dx = x1 - x0;
  const dy = y1 - y0;
  const len = Math.hypot(dx, dy);
  if (len === 0) {
    return { x0, y0, cx: x0, cy: y0, x1, y1 };
  }
  const mx = (x0 + x1) / 2;
  const my = (y0 + y1) / 2;
  return {
    x0,
    y0,
    cx: mx + (-dy / len) * EDGE_CURVATURE * len,
    cy: my + (dx / len) * EDGE_CURVATURE * len,
    x1,
    y1,
  };
}

/** Point on the quadratic curve at parameter t in [0, 1]. */
export function pointOnEdge(p: EdgePath, t: number): { x: number; y: number } {
  const u = 1 - t;
  return {
    x: u * u * p.x0 + 2 * u * t * p.cx + t * t * p.x1,
    y: u * u * p.y0 + 2 * u * t * p.cy + t * t * p.y1,
  };
}

export function buildMapScene(
  doc: GraphDocument,
  vs: ViewState,
  width: number,
  height: number,
): MapScene {
  const byId = new Map<string, GraphNode>(doc.nodes.map((n) => [n.node_id, n]));
  const nodes: MapSceneNode[] = [];
  for (const n of doc.nodes) {
    if (!vs.visibleTrajectories.has(n.episode_id)) continue;
    const pos = docToScreen(vs, width, height, n.x, n.y);
    nodes.push({
      nodeId: n.node_id,
      episodeId: n.episode_id,
      x: pos.x,
      y: pos.y,
      radius: NODE_RADIUS * Math.sqrt(vs.zoom),
      color: colorFor(doc, n.episode_id),
      emphasis: emphasisFor(vs, n.episode_id),
      hovered: vs.hoveredNode === n.node_id,
    });
  }
  const edges: MapSceneEdge[] = [];
  for (const e of doc.edges) {
    if (!vs.visibleTrajectories.has(e.episode_id)) continue;
    const a = byId.get(e.from_node);
    const b = byId.get(e.to_node);
    if (!a || !b) continue;
    const pa = docToScreen(vs, width, height, a.x, a.y);
    const pb = docToScreen(vs, width, height, b.x, b.y);
    const path = edgePath(pa.x, pa.y, pb.x, pb.y);
    edges.push({
      fromNode: e.from_node,
      toNode: e.to_node,
      episodeId: e.episode_id,
      count: e.count,
      color: colorFor(doc, e.episode_id),
      emphasis: emphasisFor(vs, e.episode_id),
      path,
      dot: pointOnEdge(path, vs.animationPhase),
    });
  }
  return { nodes, edges };
}

/** Slider strip: the highlighted trajectory alone when one is set, otherwise
 * every visible trajectory, each in chronological visit order. */
export function buildSliderScene(doc: GraphDocument, vs: ViewState): SliderGroup[] {
  const groups: SliderGroup[] = [];
  const episodeIds = Object.keys(doc.trajectories).sort(
    (a, b) =>
      (doc.trajectories[a]?.display_color_index ?? 0) -
      (doc.trajectories[b]?.display_color_index ?? 0),
  );
  for (const ep of episodeIds) {
    if (vs.highlightedTrajectory !== null && ep !== vs.highlightedTrajectory) continue;
    if (!vs.visibleTrajectories.has(ep)) continue;
    const entry = doc.trajectories[ep];
    if (!entry) continue;
    groups.push({
      episodeId: ep,
      agentLabel: entry.agent_label,
      color: trajectoryColor(entry.display_color_index),
      highlighted: vs.highlightedTrajectory === ep,
      items: entry.node_ids.map((nodeId, order) => ({ nodeId, episodeId: ep, order })),
    });
  }
  return groups;
}

/** The inspector shows the hovered node (hover wins over highlight). */
export function buildInspector(doc: GraphDocument, vs: ViewState): InspectorContent | null {
  if (vs.hoveredNode === null) return null;
  const node = doc.nodes.find((n) => n.node_id === vs.hoveredNode);
  if (!node) return null;
  return {
    nodeId: node.node_id,
    episodeId: node.episode_id,
    memberCount: node.member_count,
    tFirst: node.t_first,
    tLast: node.t_last,
  };
}

/** Topmost visible node under a screen point, if any. */
export function hitTestNode(scene: MapScene, sx: number, sy: number): MapSceneNode | null {
  for (let i = scene.nodes.length - 1; i >= 0; i--) {
    const n = scene.nodes[i];
    if (n && Math.hypot(sx - n.x, sy - n.y) <= n.radius) return n;
  }
  return null;
}
