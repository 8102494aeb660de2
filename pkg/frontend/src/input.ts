// Keyboard/mouse -> client messages. Steering is sent at the broadcast
// cadence while a key is held (the server holds the last command anyway).

import { ClientMessage } from "./protocol.js";

export interface SteerState {
  forward: number;
  strafe: number;
  heading_rate: number;
}

const SPEED = 1.2;
const TURN = 2.0;

export class SteeringKeys {
  private held = new Set<string>();
  private last: SteerState = { forward: 0, strafe: 0, heading_rate: 0 };

  keyDown(code: string): void {
    this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  clear(): void {
    this.held.clear();
  }

  current(): SteerState {
    const has = (c: string) => this.held.has(c);
    return {
      forward: (has("KeyW") ? SPEED : 0) + (has("KeyS") ? -SPEED : 0),
      strafe: (has("KeyA") ? SPEED : 0) + (has("KeyD") ? -SPEED : 0),
      heading_rate: (has("KeyQ") ? TURN : 0) + (has("KeyE") ? -TURN : 0),
    };
  }

  /** Message to send this tick, or null when nothing changed (idle stays idle). */
  poll(): ClientMessage | null {
    const cur = this.current();
    const changed =
      cur.forward !== this.last.forward ||
      cur.strafe !== this.last.strafe ||
      cur.heading_rate !== this.last.heading_rate;
    const moving = cur.forward !== 0 || cur.strafe !== 0 || cur.heading_rate !== 0;
    if (!changed && !moving) return null;
    this.last = cur;
    return { type: "steer", ...cur };
  }
}
