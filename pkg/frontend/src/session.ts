// REST access to the study service.

import type { ScenarioDoc, Snapshot } from './protocol.js';

export interface SessionHandle {
  sessionId: string;
  wsUrl: string;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async createSession(scenarioId: string, participantId: string, contextParam?: string): Promise<SessionHandle> {
    const body: Record<string, unknown> = { scenarioId, participantId };
    if (contextParam) body.context = contextParam;
    const response = await this.fetchImpl(`${this.baseUrl}/api/sessions`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (response.status !== 201) {
      throw new Error(`session creation failed (${response.status}): ${await response.text()}`);
    }
    return (await response.json()) as SessionHandle;
  }

  async getState(sessionId: string): Promise<Snapshot | null> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/sessions/${sessionId}/state`);
    if (response.status === 404) return null;
    if (!response.ok) throw new Error(`state fetch failed (${response.status})`);
    return (await response.json()) as Snapshot;
  }

  async getScenario(scenarioId: string): Promise<ScenarioDoc> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/scenarios/${scenarioId}`);
    if (!response.ok) throw new Error(`scenario fetch failed (${response.status})`);
    return (await response.json()) as ScenarioDoc;
  }

  async complete(sessionId: string): Promise<Record<string, unknown>> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/sessions/${sessionId}/complete`, { method: 'POST' });
    if (!response.ok) throw new Error(`completion failed (${response.status})`);
    return (await response.json()) as Record<string, unknown>;
  }
}

// Entry URL: /#/study?session=<id>&ctx=<base64url>&api=<origin>
// <id> may be a scenario id (a new session is created) or an existing
// session id (the session is resumed).
export interface EntryParams {
  id: string;
  ctx?: string;
  api?: string;
}

export function parseEntryUrl(hash: string): EntryParams | null {
  const match = /#\/study\?(.*)$/.exec(hash);
  if (!match) return null;
  const params = new URLSearchParams(match[1]);
  const id = params.get('session');
  if (!id) return null;
  return {
    id,
    ctx: params.get('ctx') ?? undefined,
    api: params.get('api') ?? undefined,
  };
}
