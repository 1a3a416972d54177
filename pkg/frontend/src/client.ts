// WebSocket client with automatic reconnect and a visible countdown.
// Message intake only appends to the view state; rendering never blocks it.

import { parseServerMessage, type ClientCommand } from "./protocol.js";
import { applyState, type ViewState } from "./view.js";

const RETRY_S = 3;

export class SessionClient {
  private ws: WebSocket | null = null;
  private retryTimer: number | null = null;

  constructor(readonly url: string, readonly view: ViewState) {}

  connect(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.view.connected = true;
      this.view.reconnectInS = 0;
      this.view.lastError = "";
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg === null) return;
      if (msg.type === "error") {
        this.view.lastError = msg.error;
        return;
      }
      applyState(this.view, msg);
    };
    ws.onclose = () => {
      this.view.connected = false;
      this.scheduleRetry();
    };
    ws.onerror = () => ws.close();
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.view.reconnectInS = RETRY_S;
    const tick = () => {
      this.view.reconnectInS -= 1;
      if (this.view.reconnectInS <= 0) {
        this.retryTimer = null;
        this.connect();
      } else {
        this.retryTimer = window.setTimeout(tick, 1000);
      }
    };
    this.retryTimer = window.setTimeout(tick, 1000);
  }

  send(cmd: ClientCommand): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(cmd));
    }
  }
}
