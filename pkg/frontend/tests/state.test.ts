import { describe, expect, it, vi } from "vitest";

import {
  advanceAnimation,
  clampZoom,
  clearHighlight,
  clickNode,
  hoverNode,
  initialViewState,
  toggleTrajectory,
  withZoom,
} from "../src/state.js";
import { GraphDocument } from "../src/types.js";

const doc: GraphDocument = {
  schema_version: 1,
  application: "t",
  nodes: [
    {
      node_id: "e1#0",
      episode_id: "e1",
      cluster_id: 0,
      x: 0,
      y: 0,
      member_count: 1,
      t_first: 0,
      t_last: 0,
      thumbnail_ref: "thumbs/e1#0.pgm",
    },
    {
      node_id: "e2#0",
      episode_id: "e2",
      cluster_id: 0,
      x: 5,
      y: 5,
      member_count: 1,
      t_first: 0,
      t_last: 0,
      thumbnail_ref: "thumbs/e2#0.pgm",
    },
  ],
  edges: [],
  trajectories: {
    e1: { agent_label: "a", node_ids: ["e1#0"], display_color_index: 0 },
    e2: { agent_label: "b", node_ids: ["e2#0"], display_color_index: 1 },
  },
};

describe("view state", () => {
  it("starts with every trajectory visible and identity transform", () => {
    const vs = initialViewState(doc);
    expect(vs.zoom).toBe(1);
    expect(vs.pan).toEqual({ x: 0, y: 0 });
    expect([...vs.visibleTrajectories].sort()).toEqual(["e1", "e2"]);
    expect(vs.highlightedTrajectory).toBeNull();
  });

  it("clamps zoom to [0.1, 10]", () => {
    expect(clampZoom(0.001)).toBe(0.1);
    expect(clampZoom(1234)).toBe(10);
    expect(clampZoom(2)).toBe(2);
    const vs = withZoom(initialViewState(doc), 99);
    expect(vs.zoom).toBe(10);
  });

  it("toggle is an involution and leaves the document alone", () => {
    const vs = initialViewState(doc);
    const once = toggleTrajectory(vs, doc, "e2");
    expect(once.visibleTrajectories.has("e2")).toBe(false);
    expect(once.visibleTrajectories.has("e1")).toBe(true);
    const twice = toggleTrajectory(once, doc, "e2");
    expect([...twice.visibleTrajectories].sort()).toEqual([...vs.visibleTrajectories].sort());
    expect(Object.keys(doc.trajectories)).toHaveLength(2);
  });

  it("hiding the highlighted trajectory clears the highlight", () => {
    let vs = clickNode(initialViewState(doc), doc, "e2#0");
    expect(vs.highlightedTrajectory).toBe("e2");
    vs = toggleTrajectory(vs, doc, "e2");
    expect(vs.highlightedTrajectory).toBeNull();
    expect(vs.visibleTrajectories.has("e2")).toBe(false);
  });

  it("toggling an unknown trajectory warns and is a no-op", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const vs = initialViewState(doc);
    expect(toggleTrajectory(vs, doc, "nope")).toBe(vs);
    expect(warn).toHaveBeenCalledOnce();
    warn.mockRestore();
  });

  it("clicking a node highlights its trajectory; background clears", () => {
    const vs = clickNode(initialViewState(doc), doc, "e1#0");
    expect(vs.highlightedTrajectory).toBe("e1");
    expect(clearHighlight(vs).highlightedTrajectory).toBeNull();
  });

  it("hovering validates the node id", () => {
    const vs = hoverNode(initialViewState(doc), doc, "e1#0");
    expect(vs.hoveredNode).toBe("e1#0");
    expect(hoverNode(vs, doc, "missing").hoveredNode).toBeNull();
  });

  it("animation phase stays in [0, 1)", () => {
    let vs = initialViewState(doc);
    vs = advanceAnimation(vs, 500);
    expect(vs.animationPhase).toBeCloseTo(0.25, 10);
    vs = advanceAnimation(vs, 1900);
    expect(vs.animationPhase).toBeGreaterThanOrEqual(0);
    expect(vs.animationPhase).toBeLessThan(1);
    expect(vs.animationPhase).toBeCloseTo(0.2, 10);
  });
});
