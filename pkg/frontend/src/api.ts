/**
 * Thin typed client for the narravo service.
 * One method per documented endpoint, one HTTP call per method - the server
 * is the only place story state lives.
 */

import type {
    EventBody,
    EventResponse,
    MetricsReportBody,
    ScriptPayload,
    SessionStatePayload,
    TraversalPayload,
    TriggerInfo,
} from './types.js';

export type FetchLike = (
    input: string,
    init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
    constructor(
        public readonly status: number,
        public readonly path: string,
        detail: string,
    ) {
        super(`${status} on ${path}: ${detail}`);
    }
}

export class NarravoClient {
    constructor(
        private readonly baseUrl: string = '',
        private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    ) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const response = await this.fetchFn(this.baseUrl + path, {
            method,
            headers: body === undefined ? {} : { 'content-type': 'application/json' },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const payload = await response.json();
        if (!response.ok) {
            throw new ApiError(response.status, path, JSON.stringify(payload));
        }
        return payload as T;
    }

    uploadScene(sceneDocument: unknown): Promise<{ scene_id: string }> {
        return this.request('POST', '/scenes', sceneDocument);
    }

    generateScript(sceneId: string, strategy: string): Promise<ScriptPayload> {
        return this.request('POST', '/scripts', { scene_id: sceneId, strategy });
    }

    getScript(scriptId: string): Promise<ScriptPayload> {
        return this.request('GET', `/scripts/${scriptId}`);
    }

    createSession(scriptId: string): Promise<SessionStatePayload> {
        return this.request('POST', '/sessions', { script_id: scriptId });
    }

    postEvent(sessionId: string, event: EventBody): Promise<EventResponse> {
        return this.request('POST', `/sessions/${sessionId}/events`, event);
    }

    getState(sessionId: string): Promise<SessionStatePayload> {
        return this.request('GET', `/sessions/${sessionId}/state`);
    }

    getTriggers(sessionId: string): Promise<{ triggers: TriggerInfo[] }> {
        return this.request('GET', `/sessions/${sessionId}/triggers`);
    }

    getLog(sessionId: string): Promise<TraversalPayload> {
        return this.request('GET', `/sessions/${sessionId}/log`);
    }

    postMetricsReport(body: MetricsReportBody): Promise<{ report: unknown; text: string }> {
        return this.request('POST', '/metrics/report', body);
    }
}
