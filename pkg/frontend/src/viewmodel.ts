// Client-side view state.
//
// Derives strictly from the server snapshot plus server events and local
// UI state (pending writes, open panel, avatar). Device values are never
// mutated locally: a control interaction marks the property pending until
// the server confirms (state_update) or vetoes (interaction_blocked).

import type {
  BlockedPayload,
  Envelope,
  ExplanationPayload,
  Literal,
  Snapshot,
  StateChange,
  TaskInfo,
  TaskUpdatePayload,
} from './protocol.js';

export interface FeedItem {
  kind: 'explanation' | 'available' | 'blocked' | 'ended' | 'error';
  instanceId?: string;
  text?: string;
  interactive?: boolean;
  rated?: 'up' | 'down';
  deviceId?: string;
}

export type ViewEvent =
  | { kind: 'devices-changed'; keys: string[] }
  | { kind: 'tasks-changed' }
  | { kind: 'feed-changed' }
  | { kind: 'session-ended' };

export class ClientViewModel {
  devices: Record<string, Record<string, Literal>> = {};
  context: Record<string, Literal> = {};
  clockMs = 0;
  tasks: Record<string, TaskInfo> = {};
  deliveryMode: Snapshot['deliveryMode'] = 'push';
  sessionStatus = 'active';
  feed: FeedItem[] = [];
  pending = new Set<string>(); // "device.property" awaiting server confirmation

  private listeners: ((event: ViewEvent) => void)[] = [];

  subscribe(listener: (event: ViewEvent) => void): void {
    this.listeners.push(listener);
  }

  private emit(event: ViewEvent): void {
    for (const listener of this.listeners) listener(event);
  }

  markPending(deviceId: string, property: string): void {
    this.pending.add(`${deviceId}.${property}`);
  }

  applySnapshot(snapshot: Snapshot): void {
    this.devices = structuredClone(snapshot.devices);
    this.context = { ...snapshot.context };
    this.clockMs = snapshot.clockMs;
    this.tasks = structuredClone(snapshot.tasks);
    if (snapshot.deliveryMode) this.deliveryMode = snapshot.deliveryMode;
    if (snapshot.status) this.sessionStatus = snapshot.status;
    for (const explanation of snapshot.explanations ?? []) {
      if (!this.feed.some((item) => item.instanceId === explanation.instanceId)) {
        this.feed.push({
          kind: 'explanation',
          instanceId: explanation.instanceId,
          text: explanation.text,
          interactive: explanation.mode === 'interactive',
        });
      }
    }
    this.pending.clear();
    this.emit({ kind: 'devices-changed', keys: [] });
    this.emit({ kind: 'tasks-changed' });
    this.emit({ kind: 'feed-changed' });
  }

  applyServerEvent(frame: Envelope): void {
    switch (frame.type) {
      case 'state_update': {
        const payload = frame.payload as { snapshot?: Snapshot; changes?: StateChange[]; clockMs?: number };
        if (payload.snapshot) {
          this.applySnapshot(payload.snapshot);
          return;
        }
        const keys: string[] = [];
        for (const change of payload.changes ?? []) {
          if (change.target.device !== undefined && change.target.property !== undefined) {
            this.devices[change.target.device][change.target.property] = change.to;
            const key = `${change.target.device}.${change.target.property}`;
            keys.push(key);
            this.pending.delete(key);
          } else if (change.target.context !== undefined) {
            this.context[change.target.context] = change.to;
          }
        }
        if (payload.clockMs !== undefined) this.clockMs = payload.clockMs;
        this.emit({ kind: 'devices-changed', keys });
        break;
      }
      case 'interaction_blocked': {
        const payload = frame.payload as unknown as BlockedPayload;
        this.pending.delete(`${payload.deviceId}.${payload.property}`);
        this.feed.push({ kind: 'blocked', deviceId: payload.deviceId });
        // the value on screen stays what the server last confirmed
        this.emit({ kind: 'devices-changed', keys: [`${payload.deviceId}.${payload.property}`] });
        this.emit({ kind: 'feed-changed' });
        break;
      }
      case 'explanation': {
        const payload = frame.payload as unknown as ExplanationPayload;
        this.feed.push({
          kind: 'explanation',
          instanceId: payload.instanceId,
          text: payload.text,
          interactive: payload.interactive,
        });
        this.emit({ kind: 'feed-changed' });
        break;
      }
      case 'explanation_available': {
        const payload = frame.payload as { instanceId: string };
        this.feed.push({ kind: 'available', instanceId: payload.instanceId });
        this.emit({ kind: 'feed-changed' });
        break;
      }
      case 'task_update': {
        const payload = frame.payload as unknown as TaskUpdatePayload;
        this.tasks[payload.taskId] = {
          status: payload.status,
          startedAtMs: payload.startedAtMs,
          endedAtMs: payload.endedAtMs,
        };
        this.emit({ kind: 'tasks-changed' });
        break;
      }
      case 'session_end': {
        this.sessionStatus = 'completed';
        this.feed.push({ kind: 'ended' });
        this.emit({ kind: 'feed-changed' });
        this.emit({ kind: 'session-ended' });
        break;
      }
      case 'error': {
        const payload = frame.payload as { message?: string };
        this.feed.push({ kind: 'error', text: payload.message });
        this.emit({ kind: 'feed-changed' });
        break;
      }
      default:
        break;
    }
  }

  recordRating(instanceId: string, value: 'up' | 'down'): void {
    const item = this.feed.find((entry) => entry.instanceId === instanceId && entry.kind === 'explanation');
    if (item) item.rated = value;
    this.emit({ kind: 'feed-changed' });
  }
}
