// View model: the latest-two-ticks mailbox and interpolation for drawing.
// Rendering never mutates simulation state; everything flows back through
// client messages.

import { Tick } from "./protocol.js";

export type EditMode = "select" | "add";

export interface DisplayState {
  user: { x: number; y: number; heading: number; tracked: boolean };
  proxy: { x: number; y: number };
  robot: { x: number; y: number; status: string };
  command: { x: number; y: number; degenerate: boolean };
  obstacle_radius: number;
}

const lerp = (a: number, b: number, s: number) => a + (b - a) * s;

function lerpAngle(a: number, b: number, s: number): number {
  let d = b - a;
  while (d > Math.PI) d -= 2 * Math.PI;
  while (d <= -Math.PI) d += 2 * Math.PI;
  return a + d * s;
}

export class ViewModel {
  latest: Tick | null = null;
  previous: Tick | null = null;
  latestAt = 0; // ms timestamp of latest tick receipt
  tickInterval = 40; // ms between broadcasts (25 Hz)
  connected = false;
  editMode: EditMode = "select";
  selected: string | null = null;
  lastError: string | null = null;

  pushTick(tick: Tick, now: number): void {
    if (this.latest !== null && tick.t >= this.latest.t) {
      this.previous = this.latest;
    } else if (this.latest !== null && tick.t < this.latest.t) {
      this.previous = null; // reset/seek: do not interpolate across it
    }
    this.latest = tick;
    this.latestAt = now;
  }

  /** Interpolated (never extrapolated) state for drawing at time `now`. */
  display(now: number): DisplayState | null {
    const cur = this.latest;
    if (cur === null) return null;
    const prev = this.previous;
    if (prev === null || cur.paused) {
      return {
        user: { ...cur.user },
        proxy: { x: cur.proxy.x, y: cur.proxy.y },
        robot: { x: cur.robot.x, y: cur.robot.y, status: cur.robot.status },
        command: { ...cur.command },
        obstacle_radius: cur.obstacle_radius,
      };
    }
    const s = Math.min(1, Math.max(0, (now - this.latestAt) / this.tickInterval));
    return {
      user: {
        x: lerp(prev.user.x, cur.user.x, s),
        y: lerp(prev.user.y, cur.user.y, s),
        heading: lerpAngle(prev.user.heading, cur.user.heading, s),
        tracked: cur.user.tracked,
      },
      proxy: {
        x: lerp(prev.proxy.x, cur.proxy.x, s),
        y: lerp(prev.proxy.y, cur.proxy.y, s),
      },
      robot: {
        x: lerp(prev.robot.x, cur.robot.x, s),
        y: lerp(prev.robot.y, cur.robot.y, s),
        status: cur.robot.status,
      },
      command: { ...cur.command },
      obstacle_radius: lerp(prev.obstacle_radius, cur.obstacle_radius, s),
    };
  }

  voiAt(x: number, y: number): string | null {
    if (!this.latest) return null;
    let best: string | null = null;
    let bestDist = Infinity;
    for (const voi of this.latest.vois) {
      const d = Math.hypot(voi.x - x, voi.y - y);
      if (d <= Math.max(voi.radius, 0.12) && d < bestDist) {
        best = voi.id;
        bestDist = d;
      }
    }
    return best;
  }

  freshVoiId(): string {
    const used = new Set((this.latest?.vois ?? []).map((v) => v.id));
    let i = 1;
    while (used.has(`voi-${i}`)) i += 1;
    return `voi-${i}`;
  }
}
