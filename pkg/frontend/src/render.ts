/** Canvas painting of map scenes plus DOM updates for the slider, inspector
 * and trajectory list. Everything here is a thin projection of scene data. */

import { fetchImage, imageUrl } from "./api.js";
import {
  InspectorContent,
  MapScene,
  MapSceneEdge,
  MapSceneNode,
  SliderGroup,
  pointOnEdge,
} from "./scene.js";
import { GraphDocument, ViewState, trajectoryColor } from "./types.js";

const DIM_ALPHA = 0.18;

/** Lazily loaded node thumbnails; nodes with failed loads draw a glyph instead. */
export class ImageCache {
  private images = new Map<string, HTMLImageElement | "failed">();

  constructor(private onLoad: () => void) {}

  get(nodeId: string): HTMLImageElement | null {
    const cached = this.images.get(nodeId);
    if (cached === "failed") return null;
    if (cached) return cached.complete ? cached : null;
    const img = new Image();
    this.images.set(nodeId, img);
    fetchImage(nodeId)
      .then((url) => {
        img.onload = this.onLoad;
        img.src = url;
      })
      .catch(() => {
        this.images.set(nodeId, "failed");
        this.onLoad();
      });
    return null;
  }
}

function drawNode(ctx: CanvasRenderingContext2D, n: MapSceneNode, cache: ImageCache): void {
  ctx.save();
  ctx.globalAlpha = n.emphasis === "dimmed" ? DIM_ALPHA : 1;
  ctx.beginPath();
  ctx.arc(n.x, n.y, n.radius, 0, Math.PI * 2);
  ctx.fillStyle = "#f4f4f4";
  ctx.fill();
  const img = cache.get(n.nodeId);
  if (img) {
    ctx.save();
    ctx.clip();
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(img, n.x - n.radius, n.y - n.radius, 2 * n.radius, 2 * n.radius);
    ctx.restore();
  } else {
    // placeholder glyph while loading or after a failed fetch
    ctx.fillStyle = "#999";
    ctx.font = `${Math.round(n.radius)}px system-ui`;
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText("·", n.x, n.y);
  }
  ctx.lineWidth = n.emphasis === "highlighted" ? 3 : 1.5;
  ctx.strokeStyle = n.color;
  ctx.stroke();
  if (n.hovered) {
    ctx.beginPath();
    ctx.arc(n.x, n.y, n.radius + 3, 0, Math.PI * 2);
    ctx.strokeStyle = "#222";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
  ctx.restore();
}

function drawEdge(ctx: CanvasRenderingContext2D, e: MapSceneEdge): void {
  ctx.save();
  ctx.globalAlpha = e.emphasis === "dimmed" ? DIM_ALPHA : 0.85;
  ctx.beginPath();
  ctx.moveTo(e.path.x0, e.path.y0);
  ctx.quadraticCurveTo(e.path.cx, e.path.cy, e.path.x1, e.path.y1);
  ctx.strokeStyle = e.color;
  ctx.lineWidth = e.emphasis === "highlighted" ? 2.5 : 1 + Math.log2(e.count);
  ctx.stroke();

  // arrowhead near the target, following the curve tangent
  const tip = pointOnEdge(e.path, 0.92);
  const back = pointOnEdge(e.path, 0.86);
  const angle = Math.atan2(tip.y - back.y, tip.x - back.x);
  ctx.beginPath();
  ctx.moveTo(tip.x, tip.y);
  ctx.lineTo(tip.x - 7 * Math.cos(angle - 0.4), tip.y - 7 * Math.sin(angle - 0.4));
  ctx.lineTo(tip.x - 7 * Math.cos(angle + 0.4), tip.y - 7 * Math.sin(angle + 0.4));
  ctx.closePath();
  ctx.fillStyle = e.color;
  ctx.fill();

  // flow dot marking the direction of time
  ctx.beginPath();
  ctx.arc(e.dot.x, e.dot.y, 3, 0, Math.PI * 2);
  ctx.fillStyle = "#222";
  ctx.fill();
  ctx.restore();
}

export function paintMap(ctx: CanvasRenderingContext2D, scene: MapScene, cache: ImageCache): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const e of scene.edges) drawEdge(ctx, e);
  for (const n of scene.nodes) drawNode(ctx, n, cache);
}

export function renderSlider(
  container: HTMLElement,
  groups: SliderGroup[],
  onHover: (nodeId: string | null) => void,
  onClick: (nodeId: string) => void,
): void {
  container.textContent = "";
  for (const group of groups) {
    const lane = document.createElement("div");
    lane.className = "slider-lane" + (group.highlighted ? " highlighted" : "");
    const label = document.createElement("span");
    label.className = "slider-label";
    label.textContent = group.agentLabel;
    label.style.color = group.color;
    lane.appendChild(label);
    for (const item of group.items) {
      const img = document.createElement("img");
      img.className = "slider-thumb";
      img.style.borderColor = group.color;
      img.dataset["nodeId"] = item.nodeId;
      img.alt = item.nodeId;
      img.src = imageUrl(item.nodeId);
      img.addEventListener("mouseenter", () => onHover(item.nodeId));
      img.addEventListener("mouseleave", () => onHover(null));
      img.addEventListener("click", () => onClick(item.nodeId));
      lane.appendChild(img);
    }
    container.appendChild(lane);
  }
}

export function renderInspector(panel: HTMLElement, content: InspectorContent | null): void {
  const img = panel.querySelector<HTMLImageElement>(".inspector-image");
  const caption = panel.querySelector<HTMLElement>(".inspector-caption");
  if (!img || !caption) return;
  if (content === null) {
    img.style.visibility = "hidden";
    caption.textContent = "hover a node";
    return;
  }
  img.style.visibility = "visible";
  img.src = imageUrl(content.nodeId);
  caption.textContent =
    `${content.nodeId} — ${content.memberCount} frames, ` +
    `t ${content.tFirst}–${content.tLast}`;
}

export function renderTrajectoryList(
  container: HTMLElement,
  doc: GraphDocument,
  vs: ViewState,
  onToggle: (episodeId: string) => void,
): void {
  container.textContent = "";
  const episodes = Object.entries(doc.trajectories).sort(
    (a, b) => a[1].display_color_index - b[1].display_color_index,
  );
  for (const [ep, entry] of episodes) {
    const row = document.createElement("div");
    row.className = "traj-row";
    const eye = document.createElement("button");
    eye.className = "eye-toggle";
    const visible = vs.visibleTrajectories.has(ep);
    eye.textContent = visible ? "\u{1F441}" : "—";
    eye.title = visible ? `hide ${ep}` : `show ${ep}`;
    eye.addEventListener("click", () => onToggle(ep));
    const swatch = document.createElement("span");
    swatch.className = "traj-swatch";
    swatch.style.background = trajectoryColor(entry.display_color_index);
    const label = document.createElement("span");
    label.textContent = `${ep} (${entry.agent_label})`;
    if (vs.highlightedTrajectory === ep) row.classList.add("highlighted");
    if (!visible) row.classList.add("hidden-traj");
    row.append(eye, swatch, label);
    container.appendChild(row);
  }
}

/** Slider thumbnails need the PNG form too; rewrite their URLs once mounted. */
export function upgradeImagesToPng(root: HTMLElement): void {
  root.querySelectorAll<HTMLImageElement>("img[data-node-id]").forEach((img) => {
    const nodeId = img.dataset["nodeId"];
    if (!nodeId || img.dataset["png"] === "1") return;
    img.dataset["png"] = "1";
    fetchImage(nodeId)
      .then((url) => {
        img.src = url;
      })
      .catch(() => {
        img.classList.add("failed");
      });
  });
}
