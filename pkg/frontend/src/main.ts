/**
 * Walkthrough client entry point.
 *
 * Flow: generate a script for the preloaded scene, open a session, then let
 * the user scan object cards. Every click issues exactly one API call and
 * the page re-renders from freshly fetched state, never from local edits.
 */

import { NarravoClient } from './api.js';
import { buildCompareView, buildSessionView, type ObjectCard } from './model.js';
import { renderComparePanes, renderSession } from './render.js';
import type { RatingRow, ScriptPayload } from './types.js';

const SCENE_ID = 'office_lab';
const STRATEGIES = ['s1', 's2', 's3'];

const client = new NarravoClient('..'); // the app is mounted at /ui

interface Elements {
    cards: HTMLElement;
    tree: SVGSVGElement;
    reader: HTMLElement;
    strip: HTMLElement;
    triggers: HTMLElement;
    compare: HTMLElement;
    status: HTMLElement;
}

function grab(): Elements {
    const byId = (id: string) => {
        const node = document.getElementById(id);
        if (!node) throw new Error(`missing #${id}`);
        return node;
    };
    return {
        cards: byId('object-cards'),
        tree: byId('story-tree') as unknown as SVGSVGElement,
        reader: byId('fragment-reader'),
        strip: byId('metric-strip'),
        triggers: byId('pending-triggers'),
        compare: byId('strategy-compare'),
        status: byId('status-line'),
    };
}

class WalkthroughApp {
    private sessionId = '';
    private script!: ScriptPayload;
    private openFragment: string | null = null;
    private startedAt = Date.now();
    private ratings: RatingRow[] = [];

    constructor(private readonly ui: Elements) {}

    private now(): number {
        return (Date.now() - this.startedAt) / 1000;
    }

    async start(): Promise<void> {
        this.ui.status.textContent = 'generating story from the scene...';
        this.script = await client.generateScript(SCENE_ID, 's2');
        const state = await client.createSession(this.script.script_id);
        this.sessionId = state.session_id;
        this.ui.status.textContent =
            `script ${this.script.script_id} - session ${this.sessionId}`;
        await this.refresh();
        await this.loadComparison();
    }

    /** Re-render everything from GET payloads; no client-side story state. */
    private async refresh(): Promise<void> {
        const state = await client.getState(this.sessionId);
        const triggers = await client.getTriggers(this.sessionId);
        const view = buildSessionView(this.script, state, triggers.triggers);
        renderSession(this.ui, view, this.openFragment, {
            onScan: (card) => void this.scan(card),
            onToggle: (fragment, open) => void this.toggleReader(fragment, open),
        });
    }

    private async scan(card: ObjectCard): Promise<void> {
        try {
            await client.postEvent(this.sessionId, {
                t: this.now(),
                kind: 'scan',
                object: card.scanTarget,
            });
        } catch (error) {
            this.ui.status.textContent = `scan failed, nothing changed: ${error}`;
            return; // no local mutation on failure
        }
        await this.refresh();
    }

    private async toggleReader(fragment: string, open: boolean): Promise<void> {
        if (open && this.openFragment && this.openFragment !== fragment) {
            await client.postEvent(this.sessionId, {
                t: this.now(),
                kind: 'view_end',
                fragment: this.openFragment,
            });
        }
        await client.postEvent(this.sessionId, {
            t: this.now(),
            kind: open ? 'view_start' : 'view_end',
            fragment,
        });
        this.openFragment = open ? fragment : null;
        await this.refresh();
    }

    private async loadComparison(): Promise<void> {
        const scripts: ScriptPayload[] = [];
        for (const strategy of STRATEGIES) {
            scripts.push(await client.generateScript(SCENE_ID, strategy));
        }
        renderComparePanes(
            this.ui.compare,
            buildCompareView(scripts),
            (story, value) => void this.rate(story, value),
        );
    }

    private async rate(story: string, value: number): Promise<void> {
        this.ratings.push({
            rater: this.sessionId,
            dimension: 'Interesting',
            value,
            scale_max: 7,
            story: `Story${story.slice(1)}`,
        });
        const response = await client.postMetricsReport({ story_ratings: this.ratings });
        this.ui.status.textContent =
            `rating recorded (${this.ratings.length} total); report updated`;
        console.log(response.text);
    }
}

window.addEventListener('DOMContentLoaded', () => {
    new WalkthroughApp(grab()).start().catch((error) => {
        const status = document.getElementById('status-line');
        if (status) status.textContent = `startup failed: ${error}`;
    });
});
