/**
 * Payload types for the narravo HTTP API.
 * These mirror the service JSON exactly; the client adds no fields of its own.
 */

export type Vec3 = [number, number, number];

export interface MetaphorPayload {
    text: string;
    weight: number;
}

export interface SceneObjectPayload {
    id: string;
    name: string;
    pose: { position: Vec3; orientation: [number, number, number, number] };
    bbox: Vec3;
    state: { label: string; note: string };
    semantics: {
        physical: string;
        functional: string;
        metaphorical?: MetaphorPayload;
    };
}

export interface ObjectRefPayload {
    name: string;
    role: 'key' | 'branching';
    metaphor?: string;
}

export interface BeatPayload {
    index: number;
    text: string;
    involved_objects: string[];
}

export interface TriggerPayload {
    kind: 'scan' | 'proximity' | 'after' | 'all_of' | 'any_of';
    object?: string;
    radius?: number;
    fragment?: string;
    all_of?: TriggerPayload[];
    any_of?: TriggerPayload[];
}

export interface FragmentPayload {
    name: string;
    topic: string;
    core_object: string;
    agents: string[];
    interaction_mode: string;
    symbolic_meaning: string;
    content: string;
    triggerCondition: TriggerPayload;
}

export interface ScriptDoc {
    object: ObjectRefPayload[];
    mainstory: BeatPayload[];
    fragments: FragmentPayload[];
}

export interface AnchorBindingPayload {
    name: string;
    id: string;
    score: number;
    position: Vec3;
}

export interface ValidationPayload {
    ok: boolean;
    violations: { code: string; severity: string; path: string; message: string }[];
}

export interface ScriptPayload {
    script_id: string;
    scene_id: string;
    strategy: string;
    validation: ValidationPayload;
    script: ScriptDoc;
    anchors: { bindings: AnchorBindingPayload[]; unbound: string[] };
    scene_objects: SceneObjectPayload[];
    tree: {
        root_fragments: string[];
        after_edges: [string, string][];
        orphans: string[];
    };
    elapsed_s?: number;
}

export interface SessionStatePayload {
    session_id: string;
    script_id: string;
    current_beat: number;
    beat_count: number;
    completed: boolean;
    activated: string[];
    scan_counts: Record<string, number>;
    view_durations: Record<string, number>;
    path: string[];
    warnings: string[];
    event_count: number;
}

export interface EventBody {
    t: number;
    kind: 'scan' | 'proximity' | 'view_start' | 'view_end' | 'advance';
    object?: string;
    distance?: number;
    fragment?: string;
}

export interface EventResponse {
    activated: string[];
    state: SessionStatePayload;
}

export interface TriggerInfo {
    fragment: string;
    unmet: string;
}

export interface TraversalPayload {
    traversal: {
        scan_counts: Record<string, number>;
        activation_order: string[];
        view_durations: Record<string, number>;
        path: string[];
        event_count: number;
        warnings: string[];
    };
    events: EventBody[];
}

export interface RatingRow {
    rater: string;
    dimension: string;
    value: number;
    scale_max: number;
    story?: string;
}

export interface MetricsReportBody {
    scenarios?: unknown[];
    story_ratings?: RatingRow[];
    metaphor_ratings?: RatingRow[];
}
