import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import {
    buildCompareView,
    buildMetricStrip,
    buildObjectCards,
    buildReaderEntries,
    buildSessionView,
    buildStoryTree,
    fragmentDepths,
} from '../src/model.js';
import type { ScriptPayload, SessionStatePayload, TriggerInfo } from '../src/types.js';

const FIXTURES = join(__dirname, 'fixtures');

function load<T>(name: string): T {
    return JSON.parse(readFileSync(join(FIXTURES, name), 'utf-8')) as T;
}

interface Step {
    event: { kind: string; object?: string; fragment?: string } | null;
    activated: string[];
    state: SessionStatePayload;
    triggers: TriggerInfo[];
}

const s1 = load<ScriptPayload>('script_s1.json');
const s2 = load<ScriptPayload>('script_s2.json');
const s3 = load<ScriptPayload>('script_s3.json');
const steps = load<Step[]>('walkthrough_steps.json');
const fresh = steps[0].state;

describe('object cards', () => {
    it('builds one card per declared object, with roles and anchors', () => {
        const cards = buildObjectCards(s2, fresh);
        expect(cards).toHaveLength(13);
        expect(cards.filter((c) => c.role === 'key')).toHaveLength(3);
        const door = cards.find((c) => c.name === 'door')!;
        expect(door.sceneId).toBe('door_01');
        expect(door.scanTarget).toBe('door_01');
        expect(door.metaphor).toContain('portal');
        expect(door.stateLabel).toBe('intact');
    });

    it('falls back to the narrative name when unanchored', () => {
        const cards = buildObjectCards(s3, fresh);
        for (const card of cards) {
            expect(card.sceneId).toBeUndefined();
            expect(card.scanTarget).toBe(card.name);
        }
    });

    it('reads scan counts straight from the state payload', () => {
        const afterDoor = steps[1].state;
        const cards = buildObjectCards(s2, afterDoor);
        expect(cards.find((c) => c.name === 'door')!.scanCount).toBe(1);
        expect(cards.find((c) => c.name === 'cabinet')!.scanCount).toBe(0);
    });
});

describe('story tree', () => {
    it('lays beats on the spine and fragments by after-depth', () => {
        const tree = buildStoryTree(s2, fresh);
        const beats = tree.nodes.filter((n) => n.kind === 'beat');
        expect(beats).toHaveLength(3);
        expect(beats[0].status).toBe('current');
        const depths = fragmentDepths(s2);
        expect(depths.get('frag_door_threshold')).toBe(0);
        expect(depths.get('frag_bookshelf_archive')).toBe(1);
        const byId = new Map(tree.nodes.map((n) => [n.id, n]));
        expect(byId.get('frag_bookshelf_archive')!.x).toBeGreaterThan(
            byId.get('frag_door_threshold')!.x,
        );
    });

    it('marks exactly the payload-activated fragments as lit', () => {
        const lastStep = steps[steps.length - 1];
        const tree = buildStoryTree(s2, lastStep.state);
        const lit = tree.nodes
            .filter((n) => n.kind === 'fragment' && n.status === 'activated')
            .map((n) => n.id)
            .sort();
        expect(lit).toEqual([...lastStep.state.activated].sort());
    });

    it('draws an edge for every after-edge the server reports', () => {
        const tree = buildStoryTree(s2, fresh);
        const fragmentEdges = tree.edges.filter((e) => !e.from.startsWith('beat:'));
        expect(fragmentEdges).toHaveLength(s2.tree.after_edges.length);
    });
});

describe('metric strip', () => {
    it('aggregates exactly the payload numbers', () => {
        const state = steps[steps.length - 1].state;
        const strip = buildMetricStrip(state);
        expect(strip.eventCount).toBe(state.event_count);
        expect(strip.totalScans).toBe(
            Object.values(state.scan_counts).reduce((a, b) => a + b, 0),
        );
        expect(strip.path).toEqual(state.path);
        expect(strip.completed).toBe(state.completed);
    });
});

describe('reader pane', () => {
    it('lists activated fragments in activation order with their content', () => {
        const state = steps[4].state; // after door + cabinet scans
        const entries = buildReaderEntries(s2, state);
        expect(entries.map((e) => e.name)).toEqual(state.activated);
        expect(entries[0].content.length).toBeGreaterThan(0);
    });
});

describe('session view mirrors the server state', () => {
    it('is a pure function: same payloads, deep-equal view', () => {
        const step = steps[3];
        const first = buildSessionView(s2, step.state, step.triggers);
        const second = buildSessionView(s2, step.state, step.triggers);
        expect(second).toEqual(first);
    });

    it('tracks every step of the recorded walkthrough exactly', () => {
        for (const step of steps) {
            const view = buildSessionView(s2, step.state, step.triggers);
            expect(view.reader.map((e) => e.name)).toEqual(step.state.activated);
            expect(view.strip.eventCount).toBe(step.state.event_count);
            expect(view.pendingTriggers).toEqual(step.triggers);
            const litFragments = view.tree.nodes
                .filter((n) => n.kind === 'fragment' && n.status === 'activated')
                .map((n) => n.id)
                .sort();
            expect(litFragments).toEqual([...step.state.activated].sort());
        }
    });

    it('reaches full mainstory completion after the three key scans', () => {
        const last = steps[steps.length - 1].state;
        expect(last.completed).toBe(true);
        expect(last.current_beat).toBe(last.beat_count - 1);
        const strip = buildMetricStrip(last);
        expect(strip.beatLabel).toBe('beat 3/3');
        // the unknown object was logged, not rejected
        expect(last.scan_counts['mystery_box']).toBe(1);
        expect(last.warnings.some((w) => w.includes('mystery_box'))).toBe(true);
    });

    it('accumulates reader view durations from view_start/view_end', () => {
        const afterReading = steps[3].state; // view_end at 9.5 after start at 2.0
        expect(afterReading.view_durations['frag_door_threshold']).toBeCloseTo(7.5);
    });
});

describe('strategy comparison', () => {
    it('renders three panes sorted by strategy', () => {
        const panes = buildCompareView([s3, s1, s2]);
        expect(panes.map((p) => p.strategy)).toEqual(['s1', 's2', 's3']);
        expect(panes.every((p) => p.beats.length > 0)).toBe(true);
    });

    it('highlights metaphors only where the script carries them (s2)', () => {
        const panes = buildCompareView([s1, s2, s3]);
        const byStrategy = new Map(panes.map((p) => [p.strategy, p]));
        expect(byStrategy.get('s2')!.highlights.length).toBeGreaterThan(0);
        expect(byStrategy.get('s1')!.highlights).toHaveLength(0);
        expect(byStrategy.get('s3')!.highlights).toHaveLength(0);
        const doorHighlight = byStrategy
            .get('s2')!
            .highlights.find((h) => h.objectName === 'door');
        expect(doorHighlight?.metaphor).toContain('portal');
    });

    it('surfaces what the direct strategy fails to anchor', () => {
        const pane = buildCompareView([s3])[0];
        expect(pane.unboundObjects).toEqual(['the room', 'the hum', 'the light']);
    });
});
