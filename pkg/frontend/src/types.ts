/** Wire types for the graph document served at /api/graph, plus the UI's view state. */

export interface GraphNode {
  node_id: string;
  episode_id: string;
  cluster_id: number;
  x: number;
  y: number;
  member_count: number;
  t_first: number;
  t_last: number;
  thumbnail_ref: string;
}

export interface GraphEdge {
  from_node: string;
  to_node: string;
  episode_id: string;
  count: number;
}

export interface TrajectoryEntry {
  agent_label: string;
  node_ids: string[];
  display_color_index: number;
}

export interface GraphDocument {
  schema_version: number;
  application: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
  trajectories: Record<string, TrajectoryEntry>;
}

export interface ViewState {
  pan: { x: number; y: number };
  zoom: number;
  hoveredNode: string | null;
  highlightedTrajectory: string | null;
  visibleTrajectories: ReadonlySet<string>;
  /** Animated-dot progress along edges, in [0, 1). */
  animationPhase: number;
}

export const ZOOM_MIN = 0.1;
export const ZOOM_MAX = 10;

/** One full dot cycle along an edge takes this long. */
export const DOT_PERIOD_MS = 2000;

/** Okabe-Ito categorical palette: distinguishable under common color blindness. */
export const TRAJECTORY_PALETTE = [
  "#0072b2",
  "#e69f00",
  "#009e73",
  "#cc79a7",
  "#56b4e9",
  "#d55e00",
] as const;

export function trajectoryColor(colorIndex: number): string {
  const color = TRAJECTORY_PALETTE[colorIndex % TRAJECTORY_PALETTE.length];
  return color ?? TRAJECTORY_PALETTE[0];
}
