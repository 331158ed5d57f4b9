/**
 * Session client: socket handling, state reduction, and render scheduling in
 * one DOM-free unit. The socket is injected so tests (and node) can supply
 * their own WebSocket implementation; the browser passes the global one.
 */

import { ClientMessage, parseServerMessage, PROTOCOL_VERSION } from "./protocol.js";
import { dispatchKey } from "./keymap.js";
import { applyServerMessage, initialState, UiState } from "./state.js";
import { buildRenderModel, RenderModel } from "./render.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class SessionClient {
  state: UiState = initialState();
  private socket: SocketLike | null = null;
  private renders = 0;

  constructor(
    private makeSocket: SocketFactory,
    private onRender: (model: RenderModel, state: UiState) => void = () => {},
    private now: () => number = Date.now,
  ) {}

  connect(url: string): void {
    this.state = initialState();
    const socket = this.makeSocket(url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(JSON.stringify({ type: "hello", protocol_version: PROTOCOL_VERSION }));
    };
    socket.onmessage = (ev) => {
      this.receive(String(ev.data));
    };
    socket.onclose = () => {
      if (this.state.connection !== "version-mismatch" && !this.state.done) {
        this.state = { ...this.state, connection: "disconnected" };
      }
      this.render();
    };
    this.render();
  }

  /** Feed one raw server payload; renders exactly once per frame message. */
  receive(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      return;
    }
    this.state = applyServerMessage(this.state, msg);
    this.render();
  }

  /** Route a key press; returns the message that was sent, if any. */
  pressKey(key: string): ClientMessage | null {
    const result = dispatchKey(key, this.state, this.now);
    if (result.hint !== null) {
      this.state = { ...this.state, hint: result.hint };
      this.render();
      return null;
    }
    if (result.message === null) {
      return null;
    }
    if (result.intervening !== undefined) {
      this.state = { ...this.state, intervening: result.intervening };
    }
    if (result.paused !== undefined) {
      this.state = { ...this.state, paused: result.paused };
    }
    this.socket?.send(JSON.stringify(result.message));
    this.render();
    return result.message;
  }

  renderCount(): number {
    return this.renders;
  }

  close(): void {
    this.socket?.close();
  }

  private render(): void {
    this.renders += 1;
    this.onRender(buildRenderModel(this.state), this.state);
  }
}
