// Wires the pieces together: one render loop, one WebSocket client, and
// pointer handlers that translate drags into wand commands.

import { SessionClient } from "./client.js";
import { drawStripChart } from "./charts.js";
import { gestureToCommand, startsOnRobot, type GestureContext } from "./gestures.js";
import { render, type RenderConfig } from "./render.js";
import type { Viewport } from "./transform.js";
import { initialViewState } from "./view.js";

const params = new URLSearchParams(location.search);
const serverUrl = params.get("server")
  ?? `ws://${location.hostname || "127.0.0.1"}:8765/ws`;
const httpBase = serverUrl.replace(/^ws/, "http").replace(/\/ws$/, "");

const canvas = document.getElementById("table") as HTMLCanvasElement;
const tipiCanvas = document.getElementById("tipi-chart") as HTMLCanvasElement;
const xiCanvas = document.getElementById("xi-chart") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLElement;
const errorEl = document.getElementById("error") as HTMLElement;

const view = initialViewState();
const client = new SessionClient(serverUrl, view);
client.connect();

const vp: Viewport = {
  widthPx: canvas.width,
  heightPx: canvas.height,
  tableRadiusM: 0.455,
  marginPx: 16,
};
const rc: RenderConfig = { vp, robotRadiusM: 0.037, maxImpulse: 0.2 };

// the server's config echo carries the real geometry and limits
fetch(`${httpBase}/config`)
  .then((r) => r.json())
  .then((cfg) => {
    vp.tableRadiusM = cfg.plant.table.radius;
    rc.robotRadiusM = cfg.plant.body.sphere_radius;
    rc.maxImpulse = cfg.limits.max_impulse;
  })
  .catch(() => { /* defaults stay in place until reconnect */ });

function gestureCtx(): GestureContext | null {
  if (!view.latest) return null;
  return {
    vp,
    state: view.latest,
    maxImpulse: rc.maxImpulse,
    // generous hit radius so the robot is grabbable at small scales
    robotRadiusM: rc.robotRadiusM * 3,
  };
}

function canvasPoint(ev: PointerEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [ev.clientX - rect.left, ev.clientY - rect.top];
}

canvas.addEventListener("pointerdown", (ev) => {
  const ctx = gestureCtx();
  if (!ctx) return;
  const p = canvasPoint(ev);
  view.drag = {
    startPx: p,
    currentPx: p,
    onRobot: startsOnRobot({ startPx: p, endPx: p }, ctx),
  };
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (view.drag) view.drag.currentPx = canvasPoint(ev);
});

canvas.addEventListener("pointerup", (ev) => {
  const ctx = gestureCtx();
  if (view.drag && ctx) {
    const cmd = gestureToCommand(
      { startPx: view.drag.startPx, endPx: canvasPoint(ev) }, ctx);
    if (cmd) client.send(cmd);
  }
  view.drag = null;
});

for (const [id, cmd] of [
  ["btn-ada", { type: "set_condition", condition: "ada" }],
  ["btn-rea", { type: "set_condition", condition: "rea" }],
  ["btn-pause", { type: "pause" }],
  ["btn-resume", { type: "resume" }],
] as const) {
  document.getElementById(id)?.addEventListener("click", () => client.send(cmd));
}
document.getElementById("btn-reset")?.addEventListener("click", () => {
  client.send({ type: "reset", seed: Math.floor(Math.random() * 1e6) });
});

const ctx2d = canvas.getContext("2d")!;
const tipiCtx = tipiCanvas.getContext("2d")!;
const xiCtx = xiCanvas.getContext("2d")!;

function frame(): void {
  render(ctx2d, view, rc);
  drawStripChart(tipiCtx, view.tipiSeries, tipiCanvas.width, tipiCanvas.height,
    "#60a5fa", "TiPI (nats)");
  drawStripChart(xiCtx, view.xiSeries, xiCanvas.width, xiCanvas.height,
    "#f87171", "prediction error |xi|");
  const st = view.latest;
  statusEl.textContent = st
    ? `t=${st.t}  condition=${st.condition}  ${view.connected ? "live" : "offline"}`
    : "waiting for server";
  errorEl.textContent = view.lastError;
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
