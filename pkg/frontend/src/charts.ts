// Strip charts for TiPI and prediction error, fed from the bounded ring
// buffers in the view state.

import type { RingBuffer } from "./view.js";

export function drawStripChart(
  ctx: CanvasRenderingContext2D,
  series: RingBuffer,
  width: number,
  height: number,
  color: string,
  label: string,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#111827";
  ctx.fillRect(0, 0, width, height);
  const values = series.toArray();
  if (values.length >= 2) {
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    if (hi - lo < 1e-9) {
      hi += 0.5;
      lo -= 0.5;
    }
    const pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;
    // zero line when it is in view
    if (lo < 0 && hi > 0) {
      const y0 = height - ((0 - lo) / (hi - lo)) * height;
      ctx.strokeStyle = "#374151";
      ctx.beginPath();
      ctx.moveTo(0, y0);
      ctx.lineTo(width, y0);
      ctx.stroke();
    }
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    for (let i = 0; i < values.length; i++) {
      const x = (i / (series.capacity - 1)) * width;
      const y = height - ((values[i] - lo) / (hi - lo)) * height;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
    ctx.fillStyle = "#9ca3af";
    ctx.font = "11px monospace";
    ctx.fillText(`${label}  ${values[values.length - 1].toFixed(3)}`, 6, 14);
  } else {
    ctx.fillStyle = "#6b7280";
    ctx.font = "11px monospace";
    ctx.fillText(label, 6, 14);
  }
}
