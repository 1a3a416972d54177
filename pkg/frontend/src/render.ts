// Canvas drawing: the table disc to scale, the robot with its heading
// marker, active blocks, the drag overlay, and the disconnect veil.

import { dragImpulse } from "./gestures.js";
import { tableToCanvas, pxPerMeter, type Viewport } from "./transform.js";
import type { ViewState } from "./view.js";

export interface RenderConfig {
  vp: Viewport;
  robotRadiusM: number;
  maxImpulse: number;
}

export function render(ctx: CanvasRenderingContext2D, view: ViewState, rc: RenderConfig): void {
  const { vp } = rc;
  ctx.clearRect(0, 0, vp.widthPx, vp.heightPx);

  // table disc (0.91 m across by default) and its wall
  const [cx, cy] = tableToCanvas(vp, 0, 0);
  const rPx = vp.tableRadiusM * pxPerMeter(vp);
  ctx.fillStyle = "#2a2d33";
  ctx.beginPath();
  ctx.arc(cx, cy, rPx, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#6b7280";
  ctx.lineWidth = 4;
  ctx.stroke();

  const st = view.latest;
  if (st) {
    // active blocks
    ctx.strokeStyle = "#f59e0b";
    ctx.lineWidth = 5;
    for (const b of st.blocks) {
      const [x1, y1] = tableToCanvas(vp, b.x1, b.y1);
      const [x2, y2] = tableToCanvas(vp, b.x2, b.y2);
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
    }

    // robot with heading marker (the head faces the driving direction)
    const [rx, ry] = tableToCanvas(vp, st.x, st.y);
    const robotPx = rc.robotRadiusM * pxPerMeter(vp);
    ctx.fillStyle = st.condition === "ada" ? "#60a5fa" : "#34d399";
    ctx.beginPath();
    ctx.arc(rx, ry, robotPx, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#f9fafb";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(rx, ry);
    ctx.lineTo(rx + Math.cos(st.heading) * robotPx * 1.8,
               ry - Math.sin(st.heading) * robotPx * 1.8);
    ctx.stroke();
  }

  // drag overlay with clamp indicator
  if (view.drag) {
    const d = view.drag;
    ctx.strokeStyle = d.onRobot ? "#f87171" : "#fbbf24";
    ctx.setLineDash(d.onRobot ? [] : [6, 4]);
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(d.startPx[0], d.startPx[1]);
    ctx.lineTo(d.currentPx[0], d.currentPx[1]);
    ctx.stroke();
    ctx.setLineDash([]);
    if (d.onRobot) {
      const imp = dragImpulse({ startPx: d.startPx, endPx: d.currentPx }, rc.maxImpulse);
      const mag = Math.hypot(imp.jx, imp.jy);
      ctx.fillStyle = imp.clamped ? "#f87171" : "#d1d5db";
      ctx.font = "12px monospace";
      ctx.fillText(
        `${mag.toFixed(3)} N*s${imp.clamped ? " (clamped)" : ""}`,
        d.currentPx[0] + 8, d.currentPx[1] - 8,
      );
    }
  }

  // disconnect veil with reconnect countdown
  if (!view.connected) {
    ctx.fillStyle = "rgba(17, 24, 39, 0.7)";
    ctx.fillRect(0, 0, vp.widthPx, vp.heightPx);
    ctx.fillStyle = "#f9fafb";
    ctx.font = "16px sans-serif";
    ctx.textAlign = "center";
    const note = view.reconnectInS > 0
      ? `disconnected, reconnecting in ${view.reconnectInS}s`
      : "connecting...";
    ctx.fillText(note, vp.widthPx / 2, vp.heightPx / 2);
    ctx.textAlign = "left";
  }
}
