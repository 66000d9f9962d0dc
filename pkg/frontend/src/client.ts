/** Session client: HTTP sends plus the WebSocket introspection stream.
 *
 * Reconnects with capped exponential backoff and replays history on every
 * (re)connect — the server resends the full event log, and the reducer is
 * rebuilt from scratch so duplicates cannot accumulate. Sends are refused
 * while a foreground request is pending.
 */

import { initialState, reduce } from './reducer.js';
import type { EventFrame, ViewState } from './types.js';

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export interface ClientOptions {
  baseUrl: string;
  sessionId: string;
  fetchFn?: typeof fetch;
  socketFactory?: (url: string) => SocketLike;
  scheduleFn?: (callback: () => void, delayMs: number) => void;
  onChange?: (state: ViewState) => void;
  onConnectionChange?: (connected: boolean) => void;
  maxBackoffMs?: number;
}

export class BusySendError extends Error {}

export class InspectorClient {
  state: ViewState = initialState();
  connected = false;
  attempts = 0;

  private readonly options: ClientOptions;
  private readonly fetchFn: typeof fetch;
  private readonly schedule: (callback: () => void, delayMs: number) => void;
  private socket: SocketLike | null = null;
  private closed = false;

  constructor(options: ClientOptions) {
    this.options = options;
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.schedule =
      options.scheduleFn ?? ((cb, ms) => setTimeout(cb, ms));
  }

  private wsUrl(): string {
    const base = this.options.baseUrl.replace(/^http/, 'ws').replace(/\/$/, '');
    return `${base}/sessions/${this.options.sessionId}/events`;
  }

  backoffMs(attempt: number): number {
    const cap = this.options.maxBackoffMs ?? 30_000;
    return Math.min(cap, 500 * 2 ** attempt);
  }

  connect(): void {
    if (this.closed) return;
    const factory =
      this.options.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.wsUrl());
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.attempts = 0;
      // Full replay is coming; rebuild the view from nothing.
      this.state = initialState();
      this.emitChange();
      this.options.onConnectionChange?.(true);
    };
    socket.onmessage = (event) => {
      let frame: EventFrame;
      try {
        frame = JSON.parse(event.data) as EventFrame;
      } catch {
        return; // ignore malformed frames
      }
      this.state = reduce(this.state, frame);
      this.emitChange();
    };
    socket.onclose = () => this.handleDisconnect();
    socket.onerror = () => this.handleDisconnect();
  }

  private handleDisconnect(): void {
    if (!this.socket) return;
    this.socket = null;
    if (this.connected) {
      this.connected = false;
      this.options.onConnectionChange?.(false);
    }
    if (this.closed) return;
    const delay = this.backoffMs(this.attempts);
    this.attempts += 1;
    this.schedule(() => this.connect(), delay);
  }

  /** Post one user message. Refused locally while a foreground request is
   * pending; a server-side 409 (someone else won the race) surfaces as the
   * same error type. */
  async sendMessage(text: string): Promise<void> {
    if (this.state.pendingSend) {
      throw new BusySendError('a message is already in flight');
    }
    const url = `${this.options.baseUrl.replace(/\/$/, '')}/sessions/${
      this.options.sessionId
    }/messages`;
    const response = await this.fetchFn(url, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ text }),
    });
    if (response.status === 409) {
      throw new BusySendError('session busy');
    }
    if (!response.ok) {
      const body = await response.text();
      throw new Error(`send failed (${response.status}): ${body}`);
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  private emitChange(): void {
    this.options.onChange?.(this.state);
  }
}
