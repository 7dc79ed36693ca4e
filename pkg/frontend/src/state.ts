/** Pure view-state transitions. Every function returns a new state; the
 * document itself is never touched. */

import { DOT_PERIOD_MS, GraphDocument, ViewState, ZOOM_MAX, ZOOM_MIN } from "./types.js";

export function initialViewState(doc: GraphDocument): ViewState {
  return {
    pan: { x: 0, y: 0 },
    zoom: 1,
    hoveredNode: null,
    highlightedTrajectory: null,
    visibleTrajectories: new Set(Object.keys(doc.trajectories)),
    animationPhase: 0,
  };
}

export function clampZoom(zoom: number): number {
  return Math.min(ZOOM_MAX, Math.max(ZOOM_MIN, zoom));
}

export function withZoom(vs: ViewState, zoom: number): ViewState {
  return { ...vs, zoom: clampZoom(zoom) };
}

export function withPan(vs: ViewState, x: number, y: number): ViewState {
  return { ...vs, pan: { x, y } };
}

export function hoverNode(vs: ViewState, doc: GraphDocument, nodeId: string | null): ViewState {
  if (nodeId !== null && !doc.nodes.some((n) => n.node_id === nodeId)) {
    return { ...vs, hoveredNode: null };
  }
  return { ...vs, hoveredNode: nodeId };
}

/** Clicking a node (map or slider) highlights the trajectory it belongs to. */
export function clickNode(vs: ViewState, doc: GraphDocument, nodeId: string): ViewState {
  const node = doc.nodes.find((n) => n.node_id === nodeId);
  if (!node) {
    console.warn(`click on unknown node ${nodeId}`);
    return vs;
  }
  return { ...vs, highlightedTrajectory: node.episode_id };
}

export function clearHighlight(vs: ViewState): ViewState {
  return { ...vs, highlightedTrajectory: null };
}

export function toggleTrajectory(vs: ViewState, doc: GraphDocument, episodeId: string): ViewState {
  if (!(episodeId in doc.trajectories)) {
    console.warn(`toggle on unknown trajectory ${episodeId}`);
    return vs;
  }
  const visible = new Set(vs.visibleTrajectories);
  if (visible.has(episodeId)) {
    visible.delete(episodeId);
  } else {
    visible.add(episodeId);
  }
  // hiding the highlighted trajectory would leave both views pointing at
  // something invisible, so the highlight goes with it
  const highlighted =
    vs.highlightedTrajectory === episodeId && !visible.has(episodeId)
      ? null
      : vs.highlightedTrajectory;
  return { ...vs, visibleTrajectories: visible, highlightedTrajectory: highlighted };
}

export function advanceAnimation(vs: ViewState, elapsedMs: number): ViewState {
  const phase = (vs.animationPhase + elapsedMs / DOT_PERIOD_MS) % 1;
  return { ...vs, animationPhase: phase < 0 ? phase + 1 : phase };
}
