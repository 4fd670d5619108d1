/**
 * Pure view-model builders.
 *
 * Everything here is a deterministic function of the latest server payloads;
 * no story logic happens on the client. Re-running a builder on the same
 * payloads yields a deep-equal view, which is what keeps a page refresh
 * indistinguishable from a live session.
 */

import type {
    ScriptPayload,
    SessionStatePayload,
    TriggerInfo,
} from './types.js';

// Story-tree layout constants (SVG pixels).
const BEAT_X = 90;
const BEAT_SPACING_Y = 120;
const FRAGMENT_COLUMN_X = 300;
const FRAGMENT_COLUMN_SPACING = 210;
const FRAGMENT_SPACING_Y = 64;
const TOP_MARGIN = 40;

export interface ObjectCard {
    name: string; // narrative name (what the engine's triggers use)
    role: 'key' | 'branching';
    metaphor?: string;
    sceneId?: string; // bound anchor id, when the mapper found one
    stateLabel?: string;
    stateNote?: string;
    scanCount: number;
    scanTarget: string; // what a scan click should send as the event object
}

export function buildObjectCards(
    script: ScriptPayload,
    state: SessionStatePayload,
): ObjectCard[] {
    const bindings = new Map(script.anchors.bindings.map((b) => [b.name, b]));
    const sceneById = new Map(script.scene_objects.map((o) => [o.id, o]));
    return script.script.object.map((ref) => {
        const binding = bindings.get(ref.name);
        const sceneObject = binding ? sceneById.get(binding.id) : undefined;
        const scanTarget = binding ? binding.id : ref.name;
        const scanCount =
            (state.scan_counts[scanTarget] ?? 0) +
            (scanTarget === ref.name ? 0 : state.scan_counts[ref.name] ?? 0);
        return {
            name: ref.name,
            role: ref.role,
            metaphor: ref.metaphor ?? sceneObject?.semantics.metaphorical?.text,
            sceneId: binding?.id,
            stateLabel: sceneObject?.state.label,
            stateNote: sceneObject?.state.note,
            scanCount,
            scanTarget,
        };
    });
}

export interface TreeNode {
    id: string;
    label: string;
    kind: 'beat' | 'fragment';
    status: 'current' | 'activated' | 'pending';
    x: number;
    y: number;
}

export interface TreeEdge {
    from: string;
    to: string;
}

export interface StoryTreeView {
    nodes: TreeNode[];
    edges: TreeEdge[];
    width: number;
    height: number;
}

/** Fragment depth = longest after-chain from a world-triggered fragment. */
export function fragmentDepths(script: ScriptPayload): Map<string, number> {
    const depths = new Map<string, number>();
    for (const name of script.tree.root_fragments) {
        depths.set(name, 0);
    }
    let changed = true;
    while (changed) {
        changed = false;
        for (const [parent, child] of script.tree.after_edges) {
            const parentDepth = depths.get(parent);
            if (parentDepth === undefined) continue;
            const proposal = parentDepth + 1;
            if ((depths.get(child) ?? -1) < proposal) {
                depths.set(child, proposal);
                changed = true;
            }
        }
    }
    for (const fragment of script.script.fragments) {
        if (!depths.has(fragment.name)) {
            depths.set(fragment.name, 0); // orphans render in the first column
        }
    }
    return depths;
}

export function buildStoryTree(
    script: ScriptPayload,
    state: SessionStatePayload,
): StoryTreeView {
    const activated = new Set(state.activated);
    const nodes: TreeNode[] = [];
    const edges: TreeEdge[] = [];

    script.script.mainstory.forEach((beat, i) => {
        nodes.push({
            id: `beat:${beat.index}`,
            label: `Beat ${beat.index}`,
            kind: 'beat',
            status:
                beat.index < state.current_beat
                    ? 'activated'
                    : beat.index === state.current_beat
                      ? 'current'
                      : 'pending',
            x: BEAT_X,
            y: TOP_MARGIN + i * BEAT_SPACING_Y,
        });
        if (i > 0) {
            edges.push({ from: `beat:${beat.index - 1}`, to: `beat:${beat.index}` });
        }
    });

    const depths = fragmentDepths(script);
    const rows = new Map<number, number>();
    for (const fragment of script.script.fragments) {
        const depth = depths.get(fragment.name) ?? 0;
        const row = rows.get(depth) ?? 0;
        rows.set(depth, row + 1);
        nodes.push({
            id: fragment.name,
            label: fragment.name,
            kind: 'fragment',
            status: activated.has(fragment.name) ? 'activated' : 'pending',
            x: FRAGMENT_COLUMN_X + depth * FRAGMENT_COLUMN_SPACING,
            y: TOP_MARGIN + row * FRAGMENT_SPACING_Y,
        });
    }
    for (const [parent, child] of script.tree.after_edges) {
        edges.push({ from: parent, to: child });
    }

    const width = FRAGMENT_COLUMN_X
        + (Math.max(0, ...[...rows.keys()]) + 1) * FRAGMENT_COLUMN_SPACING;
    const height = TOP_MARGIN
        + Math.max(
            script.script.mainstory.length * BEAT_SPACING_Y,
            Math.max(0, ...[...rows.values()]) * FRAGMENT_SPACING_Y,
        );
    return { nodes, edges, width, height };
}

export interface MetricStrip {
    beatLabel: string;
    completed: boolean;
    eventCount: number;
    totalScans: number;
    scanCounts: [string, number][]; // sorted by count desc, then name
    viewDurations: [string, number][];
    path: string[];
    warnings: string[];
}

export function buildMetricStrip(state: SessionStatePayload): MetricStrip {
    const scanCounts = Object.entries(state.scan_counts).sort(
        (a, b) => b[1] - a[1] || a[0].localeCompare(b[0]),
    );
    return {
        beatLabel: `beat ${state.current_beat + 1}/${state.beat_count}`,
        completed: state.completed,
        eventCount: state.event_count,
        totalScans: scanCounts.reduce((sum, [, n]) => sum + n, 0),
        scanCounts,
        viewDurations: Object.entries(state.view_durations).sort((a, b) =>
            a[0].localeCompare(b[0]),
        ),
        path: state.path,
        warnings: state.warnings,
    };
}

export interface ReaderEntry {
    name: string;
    topic: string;
    symbolicMeaning: string;
    content: string;
    coreObject: string;
}

/** Activated fragments in activation order, ready for the reader pane. */
export function buildReaderEntries(
    script: ScriptPayload,
    state: SessionStatePayload,
): ReaderEntry[] {
    const byName = new Map(script.script.fragments.map((f) => [f.name, f]));
    const entries: ReaderEntry[] = [];
    for (const name of state.activated) {
        const fragment = byName.get(name);
        if (!fragment) continue;
        entries.push({
            name: fragment.name,
            topic: fragment.topic,
            symbolicMeaning: fragment.symbolic_meaning,
            content: fragment.content,
            coreObject: fragment.core_object,
        });
    }
    return entries;
}

export interface SessionView {
    cards: ObjectCard[];
    tree: StoryTreeView;
    strip: MetricStrip;
    reader: ReaderEntry[];
    pendingTriggers: TriggerInfo[];
}

/**
 * The whole rendered session, derived from the latest GET payloads only.
 * Rendering this view and re-fetching state must agree - the invariant the
 * walkthrough tests snapshot.
 */
export function buildSessionView(
    script: ScriptPayload,
    state: SessionStatePayload,
    triggers: TriggerInfo[],
): SessionView {
    return {
        cards: buildObjectCards(script, state),
        tree: buildStoryTree(script, state),
        strip: buildMetricStrip(state),
        reader: buildReaderEntries(script, state),
        pendingTriggers: triggers,
    };
}

export interface MetaphorHighlight {
    objectName: string;
    metaphor: string;
}

export interface ComparePane {
    strategy: string;
    scriptId: string;
    beats: string[];
    fragmentCount: number;
    keyObjects: string[];
    highlights: MetaphorHighlight[]; // non-empty only for metaphor-bearing scripts
    unboundObjects: string[];
}

export function buildComparePane(script: ScriptPayload): ComparePane {
    return {
        strategy: script.strategy,
        scriptId: script.script_id,
        beats: script.script.mainstory.map((b) => b.text),
        fragmentCount: script.script.fragments.length,
        keyObjects: script.script.object
            .filter((o) => o.role === 'key')
            .map((o) => o.name),
        highlights: script.script.object
            .filter((o) => o.metaphor !== undefined && o.metaphor !== null)
            .map((o) => ({ objectName: o.name, metaphor: o.metaphor as string })),
        unboundObjects: script.anchors.unbound,
    };
}

export function buildCompareView(scripts: ScriptPayload[]): ComparePane[] {
    return [...scripts]
        .sort((a, b) => a.strategy.localeCompare(b.strategy))
        .map(buildComparePane);
}
