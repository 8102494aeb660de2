// WebSocket client: parse incoming messages, auto-reconnect, outbound send.

import { ClientMessage, ServerMessage, parseServerMessage } from "./protocol.js";

export class Connection {
  private ws: WebSocket | null = null;
  private url: string;
  onmessage: (msg: ServerMessage) => void = () => {};
  onstatus: (connected: boolean) => void = () => {};

  constructor(url: string) {
    this.url = url;
  }

  start(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => this.onstatus(true);
    ws.onmessage = (ev: MessageEvent) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.onmessage(msg);
    };
    ws.onclose = () => {
      this.onstatus(false);
      setTimeout(() => this.start(), 1000);
    };
    ws.onerror = () => ws.close();
  }

  send(msg: ClientMessage): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(msg));
    return true;
  }
}
