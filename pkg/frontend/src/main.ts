import { Connection } from "./net.js";
import { ClientMessage } from "./protocol.js";
import { Renderer } from "./render.js";
import { SteeringKeys } from "./input.js";
import { ViewModel } from "./view.js";

const vm = new ViewModel();
const canvas = document.getElementById("arena") as HTMLCanvasElement;
const renderer = new Renderer(canvas);
const status = document.getElementById("status")!;
const metrics = document.getElementById("metrics")!;
const omegaSlider = document.getElementById("omega") as HTMLInputElement;
const omegaValue = document.getElementById("omega-value")!;
const priorInput = document.getElementById("prior") as HTMLInputElement;
const selectedLabel = document.getElementById("selected")!;

const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const conn = new Connection(url);
const keys = new SteeringKeys();

conn.onstatus = (up) => {
  vm.connected = up;
  status.textContent = up ? "connected" : "disconnected";
  status.className = up ? "ok" : "bad";
  if (!up) keys.clear();
};

conn.onmessage = (msg) => {
  if (msg.type === "tick") {
    vm.pushTick(msg, performance.now());
    if (document.activeElement !== omegaSlider) {
      omegaSlider.value = String(msg.omega);
      omegaValue.textContent = msg.omega.toFixed(3);
    }
    const m = msg.metrics;
    metrics.textContent =
      `t=${msg.t.toFixed(1)}s  robot=${msg.robot.status}` +
      (msg.paused ? "  [paused]" : "") +
      (msg.recording ? `  rec: ${msg.recording}` : "") +
      (m.last_contact_voi
        ? `  contact ${m.last_contact_voi}: ${((m.last_contact_distance ?? 0) * 100).toFixed(1)}cm ` +
          (m.last_contact_success ? "HIT" : "MISS")
        : "");
  } else if (msg.type === "error") {
    vm.lastError = msg.message;
    const el = document.getElementById("error")!;
    el.textContent = msg.message;
    setTimeout(() => { if (el.textContent === msg.message) el.textContent = ""; }, 4000);
  } else if (msg.type === "warning") {
    const el = document.getElementById("error")!;
    el.textContent = msg.message;
  }
};

conn.start();

// -- steering ---------------------------------------------------------------

window.addEventListener("keydown", (e) => {
  if (e.repeat || isEditableTarget(e.target)) return;
  keys.keyDown(e.code);
});
window.addEventListener("keyup", (e) => keys.keyUp(e.code));

function isEditableTarget(t: EventTarget | null): boolean {
  return t instanceof HTMLInputElement || t instanceof HTMLTextAreaElement;
}

// steer messages at the broadcast cadence
setInterval(() => {
  const msg = keys.poll();
  if (msg) conn.send(msg);
}, 40);

// -- scene editing ----------------------------------------------------------

let dragging: string | null = null;

canvas.addEventListener("mousedown", (e) => {
  const tick = vm.latest;
  if (!tick) return;
  const rect = canvas.getBoundingClientRect();
  const [wx, wy] = renderer.toWorld(tick, e.clientX - rect.left, e.clientY - rect.top);
  if (vm.editMode === "add") {
    conn.send({ type: "add_voi", id: vm.freshVoiId(), x: round3(wx), y: round3(wy) });
    return;
  }
  const hit = vm.voiAt(wx, wy);
  vm.selected = hit;
  selectedLabel.textContent = hit ?? "none";
  if (hit) {
    const voi = tick.vois.find((v) => v.id === hit);
    if (voi) priorInput.value = String(voi.prior);
    dragging = hit;
  }
});

canvas.addEventListener("mousemove", (e) => {
  const tick = vm.latest;
  if (!tick || !dragging) return;
  const rect = canvas.getBoundingClientRect();
  const [wx, wy] = renderer.toWorld(tick, e.clientX - rect.left, e.clientY - rect.top);
  conn.send({ type: "move_voi", id: dragging, x: round3(wx), y: round3(wy) });
});

window.addEventListener("mouseup", () => { dragging = null; });

const round3 = (v: number) => Math.round(v * 1000) / 1000;

// -- controls ---------------------------------------------------------------

function bindButton(id: string, message: () => ClientMessage | null): void {
  document.getElementById(id)!.addEventListener("click", () => {
    const msg = message();
    if (msg) conn.send(msg);
  });
}

bindButton("pause", () => ({ type: vm.latest?.paused ? "resume" : "pause" }));
bindButton("reset", () => ({ type: "reset" }));
bindButton("reset-seed", () => {
  const seed = Number(prompt("seed", "1"));
  return Number.isFinite(seed) ? { type: "reset", seed: Math.floor(seed) } : null;
});
bindButton("estop", () => ({ type: "estop" }));
bindButton("release", () => ({ type: "release_estop" }));
bindButton("record", () =>
  vm.latest?.recording ? { type: "record_stop" } : { type: "record_start" });
bindButton("remove", () =>
  vm.selected ? { type: "remove_voi", id: vm.selected } : null);
bindButton("set-prior", () => {
  const prior = Number(priorInput.value);
  return vm.selected && prior >= 0 && prior <= 1
    ? { type: "set_prior", id: vm.selected, prior }
    : null;
});

const tracking = document.getElementById("tracking") as HTMLInputElement;
tracking.addEventListener("change", () =>
  conn.send({ type: "set_tracking", lost: !tracking.checked }));

omegaSlider.addEventListener("input", () => {
  const value = Number(omegaSlider.value);
  omegaValue.textContent = value.toFixed(3);
  conn.send({ type: "set_omega", value });
});

for (const mode of ["select", "add"] as const) {
  const radio = document.getElementById(`mode-${mode}`) as HTMLInputElement;
  radio.addEventListener("change", () => { if (radio.checked) vm.editMode = mode; });
}

// -- render loop ------------------------------------------------------------

function frame(): void {
  renderer.draw(vm, performance.now());
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
