"""narravo: turn a described physical scene into a branching, trigger-driven
story, bind its fragments to spatial anchors, and measure the whole pipeline.
"""

from .anchors import (
    AnchorBinding,
    AnchorTable,
    MatchResult,
    match_names,
    name_match_score,
    progressive_anchor_selection,
    score_candidates,
    spatial_consistency_check,
)
from .engine import (
    SessionEvent,
    SessionState,
    TraversalLog,
    available_triggers,
    export_log,
    handle_event,
    replay,
    start_session,
)
from .errors import DegenerateInputError, NarravoError, ParseError, ValidationError
from .gateway import (
    BackendConfig,
    FixtureStore,
    GenerationRequest,
    GenerationResult,
    PromptStrategy,
    build_prompt,
    generate_script,
    record_fixture,
    template_hash,
)
from .metrics import (
    LatencyTrace,
    MetricReport,
    OcclusionTrial,
    PairedPositions,
    RatingSample,
    ScenarioInputs,
    aggregate_ratings,
    build_report,
    coordinate_error,
    dynamic_tolerance,
    is_significant,
    latency,
    lighting_robustness,
    narrative_break_index,
    occlusion_rate,
    paired_ttest,
)
from .pipeline import PipelineBundle, PipelineConfig, evaluate_batch, run_pipeline
from .scene import (
    Metaphor,
    ObjectState,
    OcclusionTier,
    Pose,
    SceneObject,
    SceneSnapshot,
    SemanticLayers,
    StateChange,
    diff_states,
    load_scene,
    make_occlusion_tier,
    occlusion_fraction,
    serialize_scene,
)
from .script import (
    Fragment,
    MainStoryBeat,
    NarrativeScript,
    ObjectRef,
    StoryTree,
    TriggerCondition,
    ValidationReport,
    Violation,
    link_story_tree,
    parse_script,
    serialize_script,
    validate_script,
)
from .service import ServiceConfig, create_app

__version__ = "0.1.0"
