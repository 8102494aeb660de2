// Wire types for the live service (see docs/protocol.md). Version 1.

export const PROTOCOL_VERSION = 1;

export interface VoiView {
  id: string;
  x: number;
  y: number;
  radius: number;
  prior: number;
  raw_weight: number | null;
  effective_weight: number | null;
}

export interface Tick {
  type: "tick";
  v: number;
  t: number;
  paused: boolean;
  omega: number;
  arena_width: number;
  arena_length: number;
  user: { x: number; y: number; heading: number; tracked: boolean };
  proxy: { x: number; y: number; vx: number; vy: number };
  robot: { x: number; y: number; vx: number; vy: number; status: string };
  command: { x: number; y: number; degenerate: boolean };
  obstacle_radius: number;
  vois: VoiView[];
  metrics: {
    min_user_proxy_clearance: number | null;
    last_detection_time: number | null;
    last_contact_voi: string | null;
    last_contact_distance: number | null;
    last_contact_success: boolean | null;
  };
  recording: string | null;
}

export interface OkReply { type: "ok"; applied: string; detail: string | null }
export interface ErrorReply { type: "error"; message: string }
export interface WarningNotice { type: "warning"; message: string }

export type ServerMessage = Tick | OkReply | ErrorReply | WarningNotice;

export type ClientMessage =
  | { type: "steer"; forward: number; strafe: number; heading_rate: number }
  | { type: "set_omega"; value: number }
  | { type: "add_voi"; id: string; x: number; y: number; radius?: number; prior?: number }
  | { type: "move_voi"; id: string; x: number; y: number }
  | { type: "remove_voi"; id: string }
  | { type: "set_prior"; id: string; prior: number }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset"; seed?: number }
  | { type: "estop" }
  | { type: "release_estop" }
  | { type: "set_tracking"; lost: boolean }
  | { type: "record_start"; path?: string }
  | { type: "record_stop" };

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const type = (data as { type?: unknown }).type;
  if (type === "tick") {
    const tick = data as Tick;
    if (!Number.isFinite(tick.t) || !Array.isArray(tick.vois)) return null;
    return tick;
  }
  if (type === "ok" || type === "error" || type === "warning") {
    return data as ServerMessage;
  }
  return null;
}
