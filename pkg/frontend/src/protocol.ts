// Wire types for the study service protocol (see docs/protocol.md in the
// backend repository). The client never interprets rules; it renders what
// the server says.

export type Literal = boolean | string | number;

export type DeliveryMode = 'push' | 'pull' | 'interactive';

export interface Envelope<P = Record<string, unknown>> {
  type: string;
  sessionId: string;
  seq: number;
  payload: P;
}

export interface StateChange {
  target: { device?: string; property?: string; context?: string };
  from: Literal;
  to: Literal;
  cause: { kind: 'user' | 'rule' | 'trigger' | 'init'; [key: string]: unknown };
}

export interface TaskInfo {
  status: 'locked' | 'active' | 'completed' | 'timedOut' | 'aborted';
  startedAtMs: number | null;
  endedAtMs: number | null;
}

export interface Snapshot {
  devices: Record<string, Record<string, Literal>>;
  context: Record<string, Literal>;
  clockMs: number;
  tasks: Record<string, TaskInfo>;
  scenarioId?: string;
  status?: string;
  deliveryMode?: DeliveryMode;
  explanations?: ExplanationPayload[];
  logSeq?: number;
}

export interface ExplanationPayload {
  instanceId: string;
  specId: string;
  text: string;
  mode: DeliveryMode;
  source: string;
  parentInstanceId: string | null;
  interactive?: boolean;
}

export interface BlockedPayload {
  deviceId: string;
  property: string;
  value: Literal;
  ruleId: string;
}

export interface TaskUpdatePayload extends TaskInfo {
  taskId: string;
}

// Scenario document subset the client renders from.
export interface ScenarioDoc {
  id: string;
  name: string;
  rooms: RoomDoc[];
  devices: DeviceDoc[];
  tasks: { id: string; description: string; abortable: boolean }[];
}

export interface RoomDoc {
  id: string;
  bounds: { x: number; y: number; width: number; height: number };
  doors: { to: string; position: { x: number; y: number } }[];
}

export interface DeviceDoc {
  id: string;
  type: string;
  roomId: string;
  position: { x: number; y: number };
  properties: PropertyDoc[];
}

export interface PropertyDoc {
  name: string;
  kind: 'boolean' | 'enumeration' | 'numeric';
  initial: Literal;
  userWritable: boolean;
  widgetHint?: 'toggle' | 'dropdown' | 'radio' | 'slider' | 'stepper';
  values?: string[];
  min?: number;
  max?: number;
  step?: number;
}
