// Canvas drawing: top-down arena view.

import { Tick } from "./protocol.js";
import { DisplayState, ViewModel } from "./view.js";

const WALL = "#45506288";
const USER = "#4cc2ff";
const OBSTACLE = "#4cc2ff33";
const PROXY = "#ffd166";
const COMMAND = "#b78cff";
const SPRING = "#b78cff66";
const ROBOT_COLORS: Record<string, string> = {
  active: "#6ee7a0",
  halted_tracking_loss: "#ff9f43",
  halted_estop: "#ff5d5d",
  halted_rail_limit: "#ff9f43",
};

export class Renderer {
  private ctx: CanvasRenderingContext2D;
  private pad = 24;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  /** world meters -> canvas pixels */
  toPx(tick: Tick, x: number, y: number): [number, number] {
    const scale = this.scale(tick);
    // +y up on screen: flip the vertical axis
    return [this.pad + x * scale, this.canvas.height - this.pad - y * scale];
  }

  toWorld(tick: Tick, px: number, py: number): [number, number] {
    const scale = this.scale(tick);
    return [(px - this.pad) / scale, (this.canvas.height - this.pad - py) / scale];
  }

  private scale(tick: Tick): number {
    return Math.min(
      (this.canvas.width - 2 * this.pad) / tick.arena_width,
      (this.canvas.height - 2 * this.pad) / tick.arena_length,
    );
  }

  draw(vm: ViewModel, now: number): void {
    const { ctx, canvas } = this;
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const tick = vm.latest;
    const state = vm.display(now);
    if (!tick || !state) return;
    const scale = this.scale(tick);

    ctx.save();
    if (!vm.connected) ctx.globalAlpha = 0.35;

    // arena bounds
    const [x0, y0] = this.toPx(tick, 0, tick.arena_length);
    ctx.strokeStyle = WALL;
    ctx.lineWidth = 2;
    ctx.strokeRect(x0, y0, tick.arena_width * scale, tick.arena_length * scale);

    // obstacle disc around the user
    const [ux, uy] = this.toPx(tick, state.user.x, state.user.y);
    ctx.fillStyle = OBSTACLE;
    ctx.beginPath();
    ctx.arc(ux, uy, state.obstacle_radius * scale, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = USER + "55";
    ctx.stroke();

    // objects of interest with weight halos
    for (const voi of tick.vois) {
      const [vx, vy] = this.toPx(tick, voi.x, voi.y);
      const w = voi.effective_weight ?? 0;
      ctx.fillStyle = `rgba(255, 99, 132, ${0.15 + 0.75 * Math.min(1, w)})`;
      ctx.beginPath();
      ctx.arc(vx, vy, Math.max(voi.radius * scale, 5) + 8 * w, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = vm.selected === voi.id ? "#ffffff" : "#ff6384";
      ctx.beginPath();
      ctx.arc(vx, vy, Math.max(voi.radius * scale, 5), 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#c9d4e3";
      ctx.font = "12px system-ui, sans-serif";
      ctx.fillText(`${voi.id} (${(voi.prior * 100).toFixed(0)}%)`, vx + 8, vy - 8);
      if (voi.raw_weight !== null && voi.effective_weight !== null) {
        ctx.fillText(voi.effective_weight.toFixed(2), vx + 8, vy + 14);
      }
    }

    // spring line proxy <-> command, command marker
    const [cx, cy] = this.toPx(tick, state.command.x, state.command.y);
    const [px, py] = this.toPx(tick, state.proxy.x, state.proxy.y);
    ctx.strokeStyle = SPRING;
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(cx, cy);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.strokeStyle = COMMAND;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(cx - 6, cy); ctx.lineTo(cx + 6, cy);
    ctx.moveTo(cx, cy - 6); ctx.lineTo(cx, cy + 6);
    ctx.stroke();

    // proxy ball
    ctx.fillStyle = PROXY;
    ctx.beginPath();
    ctx.arc(px, py, 7, 0, 2 * Math.PI);
    ctx.fill();

    // robot column (status-colored square)
    const [rx, ry] = this.toPx(tick, state.robot.x, state.robot.y);
    ctx.fillStyle = ROBOT_COLORS[state.robot.status] ?? "#ff5d5d";
    ctx.fillRect(rx - 9, ry - 9, 18, 18);
    ctx.strokeStyle = "#0a0d11";
    ctx.strokeRect(rx - 9, ry - 9, 18, 18);

    // user avatar with heading ray
    ctx.fillStyle = state.user.tracked ? USER : "#8899aa";
    ctx.beginPath();
    ctx.arc(ux, uy, 8, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = state.user.tracked ? USER : "#8899aa";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(ux, uy);
    ctx.lineTo(ux + 26 * Math.cos(state.user.heading), uy - 26 * Math.sin(state.user.heading));
    ctx.stroke();

    ctx.restore();

    if (!vm.connected) {
      ctx.fillStyle = "#ff9f43";
      ctx.font = "16px system-ui, sans-serif";
      ctx.fillText("disconnected — reconnecting…", this.pad, 20);
    }
  }
}
