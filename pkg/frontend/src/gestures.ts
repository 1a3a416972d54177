// Pointer gestures become wand commands: a drag starting on the robot is
// a nudge whose impulse is the drag vector, a drag elsewhere walls off a
// segment of the table, and a click on an existing block removes it.

import type { BlockSegment, ClientCommand, WireState } from "./protocol.js";
import { canvasToTable, pxPerMeter, type Viewport } from "./transform.js";

export const IMPULSE_PER_PX = 0.001; // N*s per pixel of drag

export interface GestureContext {
  vp: Viewport;
  state: WireState;
  maxImpulse: number;   // server-enforced limit, mirrored for the clamp indicator
  robotRadiusM: number; // hit-test radius around the robot
}

export interface Gesture {
  startPx: [number, number];
  endPx: [number, number];
}

export function dragImpulse(g: Gesture, max: number): { jx: number; jy: number; clamped: boolean } {
  // canvas y points down, impulses live in the table frame
  let jx = (g.endPx[0] - g.startPx[0]) * IMPULSE_PER_PX;
  let jy = -(g.endPx[1] - g.startPx[1]) * IMPULSE_PER_PX;
  const mag = Math.hypot(jx, jy);
  const clamped = mag > max;
  if (clamped && mag > 0) {
    jx *= max / mag;
    jy *= max / mag;
  }
  return { jx, jy, clamped };
}

export function startsOnRobot(g: Gesture, ctx: GestureContext): boolean {
  const [sx, sy] = canvasToTable(ctx.vp, g.startPx[0], g.startPx[1]);
  return Math.hypot(sx - ctx.state.x, sy - ctx.state.y) <= ctx.robotRadiusM;
}

export function blockAt(pointPx: [number, number], ctx: GestureContext): BlockSegment | null {
  const [px, py] = canvasToTable(ctx.vp, pointPx[0], pointPx[1]);
  const tolM = 10 / pxPerMeter(ctx.vp); // 10 px click tolerance
  for (const b of ctx.state.blocks) {
    const ex = b.x2 - b.x1;
    const ey = b.y2 - b.y1;
    const ll = ex * ex + ey * ey;
    const u = ll === 0 ? 0 : Math.min(1, Math.max(0, ((px - b.x1) * ex + (py - b.y1) * ey) / ll));
    const d = Math.hypot(px - (b.x1 + u * ex), py - (b.y1 + u * ey));
    if (d <= tolM) return b;
  }
  return null;
}

export function gestureToCommand(g: Gesture, ctx: GestureContext): ClientCommand | null {
  const lenPx = Math.hypot(g.endPx[0] - g.startPx[0], g.endPx[1] - g.startPx[1]);
  if (lenPx < 3) {
    // treat as a click: remove a block if one is under the pointer
    const hit = blockAt(g.startPx, ctx);
    return hit ? { type: "block_off", id: hit.id } : null;
  }
  if (startsOnRobot(g, ctx)) {
    const { jx, jy } = dragImpulse(g, ctx.maxImpulse);
    return { type: "nudge", x: ctx.state.x, y: ctx.state.y, jx, jy };
  }
  const [x1, y1] = canvasToTable(ctx.vp, g.startPx[0], g.startPx[1]);
  const [x2, y2] = canvasToTable(ctx.vp, g.endPx[0], g.endPx[1]);
  return { type: "block_on", x1, y1, x2, y2 };
}
