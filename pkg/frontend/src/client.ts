/**
 * Socket client: parses server messages into the reducer and reconnects
 * with backoff when the connection drops. Works with the browser WebSocket
 * or any object with the same send/close/event surface (the tests inject
 * one from the `ws` package).
 */

import { parseServerMsg, type ClientMsg, type ServerMsg } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export interface ClientHooks {
  onMessage(msg: ServerMsg): void;
  onStatus(status: "connecting" | "open" | "closed"): void;
}

export class ServiceClient {
  private socket: SocketLike | null = null;
  private stopped = false;
  private readonly makeSocket: () => SocketLike;
  private readonly hooks: ClientHooks;
  private readonly reconnectDelayMs: number;

  constructor(makeSocket: () => SocketLike, hooks: ClientHooks, reconnectDelayMs = 1000) {
    this.makeSocket = makeSocket;
    this.hooks = hooks;
    this.reconnectDelayMs = reconnectDelayMs;
  }

  connect(): void {
    if (this.stopped) return;
    this.hooks.onStatus("connecting");
    const socket = this.makeSocket();
    this.socket = socket;
    socket.onopen = () => this.hooks.onStatus("open");
    socket.onclose = () => {
      this.hooks.onStatus("closed");
      if (!this.stopped) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    socket.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg !== null) this.hooks.onMessage(msg);
    };
  }

  send(msg: ClientMsg): void {
    try {
      this.socket?.send(JSON.stringify(msg));
    } catch {
      // connection raced shut; the reconnect loop will restore it
    }
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }
}
