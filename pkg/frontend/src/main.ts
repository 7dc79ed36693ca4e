/** Bootstrapping and event wiring for the explorer page. */

import { fetchDocument } from "./api.js";
import {
  buildInspector,
  buildMapScene,
  buildSliderScene,
  hitTestNode,
  screenToDoc,
} from "./scene.js";
import {
  advanceAnimation,
  clearHighlight,
  clickNode,
  hoverNode,
  initialViewState,
  toggleTrajectory,
  withPan,
  withZoom,
} from "./state.js";
import {
  ImageCache,
  paintMap,
  renderInspector,
  renderSlider,
  renderTrajectoryList,
  upgradeImagesToPng,
} from "./render.js";
import { GraphDocument, ViewState } from "./types.js";

function mustGet<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const canvas = mustGet<HTMLCanvasElement>("map-canvas");
  const sliderEl = mustGet<HTMLElement>("slider");
  const inspectorEl = mustGet<HTMLElement>("inspector");
  const trajListEl = mustGet<HTMLElement>("trajectory-list");
  const titleEl = mustGet<HTMLElement>("app-title");

  const doc: GraphDocument = await fetchDocument();
  titleEl.textContent = `${doc.application} — ${doc.nodes.length} states`;

  let vs: ViewState = initialViewState(doc);
  let sideDirty = true;

  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const cache = new ImageCache(() => {
    // repaint on image arrival happens naturally on the next animation frame
  });

  function resize(): void {
    canvas.width = canvas.clientWidth;
    canvas.height = canvas.clientHeight;
  }
  window.addEventListener("resize", resize);
  resize();

  function update(next: ViewState, sideChanged = false): void {
    vs = next;
    sideDirty = sideDirty || sideChanged;
  }

  // --- map interactions ---
  let dragging = false;
  let moved = false;
  let last = { x: 0, y: 0 };

  canvas.addEventListener("mousedown", (ev) => {
    dragging = true;
    moved = false;
    last = { x: ev.offsetX, y: ev.offsetY };
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (dragging) {
      const dx = ev.offsetX - last.x;
      const dy = ev.offsetY - last.y;
      if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
      last = { x: ev.offsetX, y: ev.offsetY };
      update(withPan(vs, vs.pan.x + dx / vs.zoom, vs.pan.y + dy / vs.zoom));
      return;
    }
    const scene = buildMapScene(doc, vs, canvas.width, canvas.height);
    const hit = hitTestNode(scene, ev.offsetX, ev.offsetY);
    update(hoverNode(vs, doc, hit ? hit.nodeId : null));
  });
  canvas.addEventListener("mouseleave", () => update(hoverNode(vs, doc, null)));
  canvas.addEventListener("click", (ev) => {
    if (moved) return; // end of a drag, not a click
    const scene = buildMapScene(doc, vs, canvas.width, canvas.height);
    const hit = hitTestNode(scene, ev.offsetX, ev.offsetY);
    update(hit ? clickNode(vs, doc, hit.nodeId) : clearHighlight(vs), true);
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = Math.exp(-ev.deltaY * 0.0015);
    const before = screenToDoc(vs, canvas.width, canvas.height, ev.offsetX, ev.offsetY);
    const zoomed = withZoom(vs, vs.zoom * factor);
    const after = screenToDoc(zoomed, canvas.width, canvas.height, ev.offsetX, ev.offsetY);
    update(withPan(zoomed, zoomed.pan.x + (after.x - before.x), zoomed.pan.y + (after.y - before.y)));
  });

  // --- slider interactions: wheel scrolls horizontally, map unaffected ---
  sliderEl.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    ev.stopPropagation();
    sliderEl.scrollLeft += ev.deltaY + ev.deltaX;
  });

  function repaintSide(): void {
    renderSlider(
      sliderEl,
      buildSliderScene(doc, vs),
      (nodeId) => update(hoverNode(vs, doc, nodeId)),
      (nodeId) => update(clickNode(vs, doc, nodeId), true),
    );
    upgradeImagesToPng(sliderEl);
    renderTrajectoryList(trajListEl, doc, vs, (ep) => update(toggleTrajectory(vs, doc, ep), true));
  }

  let lastTime = performance.now();
  let lastInspector: string | null = "";
  function frame(now: number): void {
    update(advanceAnimation(vs, now - lastTime));
    lastTime = now;
    paintMap(ctx!, buildMapScene(doc, vs, canvas.width, canvas.height), cache);
    const inspector = buildInspector(doc, vs);
    const key = inspector ? inspector.nodeId : null;
    if (key !== lastInspector) {
      renderInspector(inspectorEl, inspector);
      lastInspector = key;
    }
    if (sideDirty) {
      repaintSide();
      sideDirty = false;
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

boot().catch((err) => {
  const el = document.getElementById("app-title");
  if (el) el.textContent = `failed to load: ${err}`;
  console.error(err);
});
