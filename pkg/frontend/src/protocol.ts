// Wire schema of the session server. The UI holds no simulation logic:
// everything it displays originates from these state messages.

export interface BlockSegment {
  id: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface WireState {
  type: "state";
  t: number;
  x: number;
  y: number;
  heading: number;
  vx: number;
  vy: number;
  condition: string;
  tipi: number;
  xi_norm: number;
  blocks: BlockSegment[];
}

export interface ErrorReply {
  type: "error";
  error: string;
}

export type ServerMessage = WireState | ErrorReply;

export type ClientCommand =
  | { type: "nudge"; x: number; y: number; jx: number; jy: number }
  | { type: "block_on"; x1: number; y1: number; x2: number; y2: number }
  | { type: "block_off"; id: number }
  | { type: "set_condition"; condition: "ada" | "rea" }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset"; seed: number };

const STATE_NUMBERS = ["t", "x", "y", "heading", "vx", "vy", "tipi", "xi_norm"] as const;

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.type === "error" && typeof msg.error === "string") {
    return { type: "error", error: msg.error };
  }
  if (msg.type !== "state") return null;
  for (const key of STATE_NUMBERS) {
    if (typeof msg[key] !== "number" || !isFinite(msg[key] as number)) return null;
  }
  if (typeof msg.condition !== "string" || !Array.isArray(msg.blocks)) return null;
  return msg as unknown as WireState;
}
