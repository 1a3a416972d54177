// Canvas <-> table coordinate mapping. The table is meters, centered at
// the origin, +y away from the viewer's lap; the canvas is pixels with
// +y downward, so the y axis flips.

export interface Viewport {
  widthPx: number;
  heightPx: number;
  tableRadiusM: number;
  marginPx: number;
}

export function pxPerMeter(vp: Viewport): number {
  const usable = Math.min(vp.widthPx, vp.heightPx) / 2 - vp.marginPx;
  return usable / vp.tableRadiusM;
}

export function tableToCanvas(vp: Viewport, xM: number, yM: number): [number, number] {
  const k = pxPerMeter(vp);
  return [vp.widthPx / 2 + xM * k, vp.heightPx / 2 - yM * k];
}

export function canvasToTable(vp: Viewport, xPx: number, yPx: number): [number, number] {
  const k = pxPerMeter(vp);
  return [(xPx - vp.widthPx / 2) / k, -(yPx - vp.heightPx / 2) / k];
}
