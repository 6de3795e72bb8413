// The per-session WebSocket with the client-side send counter.
//
// Every participant action goes through send(), so client seqs are
// monotonically increasing by construction; the server is authoritative
// for all state (no optimistic updates originate here).

import type { Envelope, Literal } from './protocol.js';

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
};

export type WebSocketFactory = (url: string) => WebSocketLike;

export class SessionSocket {
  private seq = 0;
  private socket: WebSocketLike;
  private listeners: ((event: Envelope) => void)[] = [];
  private openListeners: (() => void)[] = [];
  private ready = false;
  private outbox: string[] = []; // frames sent while still connecting

  constructor(
    private readonly sessionId: string,
    wsUrl: string,
    factory: WebSocketFactory = (url) => new WebSocket(url) as unknown as WebSocketLike,
  ) {
    this.socket = factory(wsUrl);
    this.socket.addEventListener('open', () => {
      this.ready = true;
      for (const frame of this.outbox.splice(0)) this.socket.send(frame);
      for (const listener of this.openListeners) listener();
    });
    this.socket.addEventListener('message', (event: { data: unknown }) => {
      const frame = JSON.parse(String(event.data)) as Envelope;
      for (const listener of this.listeners) listener(frame);
    });
  }

  onOpen(listener: () => void): void {
    this.openListeners.push(listener);
  }

  onEvent(listener: (event: Envelope) => void): void {
    this.listeners.push(listener);
  }

  get sentCount(): number {
    return this.seq;
  }

  private send(type: string, payload: Record<string, unknown>): void {
    this.seq += 1;
    const frame: Envelope = { type, sessionId: this.sessionId, seq: this.seq, payload };
    const data = JSON.stringify(frame);
    if (this.ready) {
      this.socket.send(data);
    } else {
      this.outbox.push(data);
    }
  }

  interact(deviceId: string, property: string, value: Literal): void {
    this.send('device_interaction', { deviceId, property, value });
  }

  requestExplanation(deviceId?: string): void {
    this.send('explanation_request', deviceId ? { deviceId } : {});
  }

  query(text: string, parentInstanceId?: string): void {
    this.send('explanation_query', parentInstanceId ? { text, parentInstanceId } : { text });
  }

  rate(instanceId: string, value: 'up' | 'down'): void {
    this.send('explanation_rating', { instanceId, value });
  }

  telemetry(kind: string, data: Record<string, unknown> = {}): void {
    this.send('client_telemetry', { kind, data });
  }

  abortTask(taskId: string): void {
    this.send('abort_task', { taskId });
  }

  close(): void {
    this.socket.close();
  }
}
