/** Canvas rendering of a labeling batch over world contour rings.
 *
 * Geometry (world-to-pixel transform, hit testing) is kept separate from
 * the drawing calls so it can be tested without a DOM.
 */

import { BatchItem, WorldContext } from "./api.js";
import { BatchState } from "./session.js";

export interface Viewport {
  width: number;
  height: number;
  lo: [number, number];
  hi: [number, number];
}

export function worldToPixel(v: Viewport, p: [number, number]): [number, number] {
  const sx = v.width / (v.hi[0] - v.lo[0]);
  const sy = v.height / (v.hi[1] - v.lo[1]);
  // y axis flipped: world up is screen up
  return [(p[0] - v.lo[0]) * sx, v.height - (p[1] - v.lo[1]) * sy];
}

export function pixelToWorld(v: Viewport, px: [number, number]): [number, number] {
  const sx = (v.hi[0] - v.lo[0]) / v.width;
  const sy = (v.hi[1] - v.lo[1]) / v.height;
  return [v.lo[0] + px[0] * sx, v.lo[1] + (v.height - px[1]) * sy];
}

/** The nearest batch item within `radiusPx` of a click, if any. */
export function hitTest(
  v: Viewport,
  items: BatchItem[],
  clickPx: [number, number],
  radiusPx = 12,
): BatchItem | null {
  let best: BatchItem | null = null;
  let bestDist = radiusPx;
  for (const item of items) {
    const [x, y] = worldToPixel(v, item.point);
    const d = Math.hypot(x - clickPx[0], y - clickPx[1]);
    if (d <= bestDist) {
      best = item;
      bestDist = d;
    }
  }
  return best;
}

export interface LabeledPoint {
  point: [number, number];
  y: 0 | 1;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  v: Viewport,
  world: WorldContext,
  state: BatchState,
  previouslyLabeled: LabeledPoint[],
): void {
  ctx.clearRect(0, 0, v.width, v.height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, v.width, v.height);

  // faint contour rings at 1 and 2 sigma per component
  ctx.strokeStyle = "rgba(100, 100, 160, 0.25)";
  ctx.lineWidth = 1;
  const sx = v.width / (v.hi[0] - v.lo[0]);
  for (const comp of world.components) {
    const [cx, cy] = worldToPixel(v, comp.mean);
    for (const k of [1, 2]) {
      ctx.beginPath();
      ctx.arc(cx, cy, comp.sigma * k * sx, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  // previously acknowledged labels, dimmed
  for (const prev of previouslyLabeled) {
    const [x, y] = worldToPixel(v, prev.point);
    ctx.fillStyle = prev.y === 0 ? "rgba(200, 60, 60, 0.35)" : "rgba(60, 140, 60, 0.35)";
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  // current batch: dots with a red ring when toggled malign
  for (const item of state.items) {
    const [x, y] = worldToPixel(v, item.point);
    ctx.fillStyle = "#20242c";
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
    if (state.isMalign(item.sample_id)) {
      ctx.strokeStyle = "#d62828";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.arc(x, y, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}
