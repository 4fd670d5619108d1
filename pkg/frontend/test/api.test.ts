import { describe, expect, it } from 'vitest';

import { ApiError, NarravoClient, type FetchLike } from '../src/api.js';

interface RecordedCall {
    url: string;
    method: string;
    body?: unknown;
}

function recordingFetch(
    calls: RecordedCall[],
    respond: (url: string) => unknown = () => ({}),
    status = 200,
): FetchLike {
    return async (url, init) => {
        calls.push({
            url,
            method: init?.method ?? 'GET',
            body: init?.body ? JSON.parse(init.body) : undefined,
        });
        return {
            ok: status < 400,
            status,
            json: async () => respond(url),
        };
    };
}

describe('NarravoClient', () => {
    it('maps every action to exactly one documented call', async () => {
        const calls: RecordedCall[] = [];
        const client = new NarravoClient('', recordingFetch(calls));

        await client.uploadScene({ scene_id: 'x', objects: [] });
        await client.generateScript('office_lab', 's2');
        await client.getScript('abc');
        await client.createSession('abc');
        await client.postEvent('sid', { t: 1.0, kind: 'scan', object: 'door_01' });
        await client.getState('sid');
        await client.getTriggers('sid');
        await client.getLog('sid');
        await client.postMetricsReport({ story_ratings: [] });

        expect(calls.map((c) => `${c.method} ${c.url}`)).toEqual([
            'POST /scenes',
            'POST /scripts',
            'GET /scripts/abc',
            'POST /sessions',
            'POST /sessions/sid/events',
            'GET /sessions/sid/state',
            'GET /sessions/sid/triggers',
            'GET /sessions/sid/log',
            'POST /metrics/report',
        ]);
        expect(calls[1].body).toEqual({ scene_id: 'office_lab', strategy: 's2' });
        expect(calls[4].body).toEqual({ t: 1.0, kind: 'scan', object: 'door_01' });
    });

    it('prefixes the base URL', async () => {
        const calls: RecordedCall[] = [];
        const client = new NarravoClient('..', recordingFetch(calls));
        await client.getState('sid');
        expect(calls[0].url).toBe('../sessions/sid/state');
    });

    it('throws a typed error with status and payload detail', async () => {
        const calls: RecordedCall[] = [];
        const client = new NarravoClient(
            '',
            recordingFetch(calls, () => ({ error: { message: 'unknown session' } }), 404),
        );
        await expect(client.getState('nope')).rejects.toThrowError(ApiError);
        await expect(client.getState('nope')).rejects.toThrowError(/404/);
    });
});
