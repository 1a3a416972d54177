// Client-side view state: the latest server state, connection status,
// drag-in-progress geometry, and bounded ring buffers feeding the strip
// charts. All reducers here are pure so they can be tested headlessly.

import type { WireState } from "./protocol.js";

export class RingBuffer {
  private data: Float64Array;
  private head = 0;
  private count = 0;

  constructor(readonly capacity: number) {
    this.data = new Float64Array(capacity);
  }

  push(v: number): void {
    this.data[this.head] = v;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) this.count += 1;
  }

  get length(): number {
    return this.count;
  }

  // oldest to newest
  toArray(): number[] {
    const out = new Array<number>(this.count);
    const start = (this.head - this.count + this.capacity) % this.capacity;
    for (let i = 0; i < this.count; i++) {
      out[i] = this.data[(start + i) % this.capacity];
    }
    return out;
  }
}

export const CHART_SAMPLES = 1200;

export interface DragState {
  startPx: [number, number];
  currentPx: [number, number];
  onRobot: boolean;
}

export interface ViewState {
  latest: WireState | null;
  connected: boolean;
  reconnectInS: number;
  drag: DragState | null;
  lastError: string;
  tipiSeries: RingBuffer;
  xiSeries: RingBuffer;
}

export function initialViewState(): ViewState {
  return {
    latest: null,
    connected: false,
    reconnectInS: 0,
    drag: null,
    lastError: "",
    tipiSeries: new RingBuffer(CHART_SAMPLES),
    xiSeries: new RingBuffer(CHART_SAMPLES),
  };
}

export function applyState(view: ViewState, state: WireState): void {
  view.latest = state;
  view.tipiSeries.push(state.tipi);
  view.xiSeries.push(state.xi_norm);
}
