"""Quantitative evaluation suite for the pipeline.

Closed-form metrics: coordinate error (mean Euclidean distance between true
and detected positions), occlusion recognition rate, response latency,
narrative break index, lighting robustness, dynamic tolerance (thematic
drift), rating aggregation and paired t-tests. Reports mirror the shape of
the cross-scenario / metaphor / story-evaluation result tables.

Conventions, also emitted in every report legend:
- ratings map to percent as mean/scale_max*100;
- NBI is break severity: lower means fewer narrative breaks;
- a metric that was not measured is absent ("-"), never zero.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateInputError, ValidationError
from .scene import OcclusionTier

SIGNIFICANCE_ALPHA = 0.05

LEGEND = (
    "ratings are mapped to percent as mean/scale_max*100",
    "NBI is break severity on a 1-10 scale: lower is better",
    "absent metrics are reported as '-', never as 0",
)


def _pct(value: float) -> float:
    """Percentages are reported to one decimal."""
    return round(value, 1)


@dataclass(frozen=True)
class PairedPositions:
    """(true, detected) position pairs in metres."""

    pairs: tuple[tuple[tuple[float, float, float], tuple[float, float, float]], ...]

    @staticmethod
    def from_sequences(true_positions: Sequence, detected_positions: Sequence) -> "PairedPositions":
        if len(true_positions) != len(detected_positions):
            raise ValidationError("position lists must have equal length")
        return PairedPositions(
            tuple(
                (tuple(map(float, t)), tuple(map(float, d)))
                for t, d in zip(true_positions, detected_positions)
            )
        )


@dataclass(frozen=True)
class OcclusionTrial:
    tier: OcclusionTier
    correct: bool


@dataclass(frozen=True)
class LatencyTrace:
    """(event time, response time) pairs in seconds."""

    events: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RatingSample:
    rater: str
    dimension: str
    value: float
    scale_max: float
    story: str | None = None  # set for story-comparison questionnaires

    def __post_init__(self):
        if not 1 <= self.value <= self.scale_max:
            raise ValidationError(
                f"rating {self.value} outside [1, {self.scale_max}] "
                f"(rater {self.rater!r}, dimension {self.dimension!r})"
            )


def coordinate_error(pairs: PairedPositions | Iterable) -> float:
    """Mean Euclidean distance between true and detected positions (metres)."""
    raw = pairs.pairs if isinstance(pairs, PairedPositions) else tuple(pairs)
    if not raw:
        raise DegenerateInputError(
            "coordinate error is undefined without position pairs; "
            "report it as absent instead"
        )
    true_arr = np.asarray([p[0] for p in raw], dtype=float)
    det_arr = np.asarray([p[1] for p in raw], dtype=float)
    if true_arr.shape != det_arr.shape or true_arr.shape[1:] != (3,):
        raise ValidationError("pairs must hold 3-vectors")
    if not (np.isfinite(true_arr).all() and np.isfinite(det_arr).all()):
        raise ValidationError("positions must be finite")
    return float(np.mean(np.linalg.norm(true_arr - det_arr, axis=1)))


def occlusion_rate(trials: Sequence[OcclusionTrial]) -> float:
    """Percent of occlusion trials answered correctly, to one decimal."""
    if not trials:
        raise DegenerateInputError("occlusion rate requires at least one trial")
    correct = sum(1 for t in trials if t.correct)
    return _pct(correct / len(trials) * 100.0)


def latency(trace: LatencyTrace | Sequence[tuple[float, float]]) -> float:
    """Mean seconds between each event and its narrative response."""
    events = trace.events if isinstance(trace, LatencyTrace) else tuple(trace)
    if not events:
        raise DegenerateInputError("latency requires at least one event/response pair")
    deltas = []
    for t_event, t_response in events:
        if t_response < t_event:
            raise ValidationError(
                f"response at t={t_response} precedes its event at t={t_event}"
            )
        deltas.append(t_response - t_event)
    return float(np.mean(deltas))


def narrative_break_index(scores: Sequence[RatingSample]) -> float:
    """Mean break-severity score on the 1-10 scale (lower is better)."""
    if not scores:
        raise DegenerateInputError("NBI requires at least one score")
    for sample in scores:
        if sample.scale_max != 10:
            raise ValidationError("NBI scores are defined on a 1-10 scale")
        if not 1 <= sample.value <= 10:
            raise ValidationError(f"NBI score {sample.value} outside 1-10")
    return float(np.mean([s.value for s in scores]))


def lighting_robustness(ap_extreme: float, ap_normal: float) -> float:
    """Performance retained under extreme lighting, as a percent of normal.

    Capped at 100: a model cannot be more robust than its own baseline.
    """
    if ap_normal <= 0:
        raise DegenerateInputError("normal-lighting score must be positive")
    if ap_extreme < 0:
        raise ValidationError("extreme-lighting score must be non-negative")
    return _pct(min(100.0, ap_extreme / ap_normal * 100.0))


def _tagset(tags: Iterable[str]) -> set[str]:
    return {t.strip().lower() for t in tags if t and t.strip()}


def dynamic_tolerance(
    fragments: Sequence[tuple[Iterable[str], Iterable[str]]],
    theme: Iterable[str],
) -> float:
    """Percent of fragments whose topic+content tags share nothing with the
    theme (thematic drift), to one decimal."""
    if not fragments:
        raise DegenerateInputError("dynamic tolerance requires at least one fragment")
    theme_tags = _tagset(theme)
    if not theme_tags:
        raise ValidationError("theme must contain at least one tag")
    drifting = 0
    for topic_tags, content_tags in fragments:
        if not (_tagset(topic_tags) | _tagset(content_tags)) & theme_tags:
            drifting += 1
    return _pct(drifting / len(fragments) * 100.0)


def aggregate_ratings(samples: Sequence[RatingSample], dimension: str) -> float:
    """Mean rating for one dimension as percent of its scale, to one decimal."""
    selected = [s for s in samples if s.dimension == dimension]
    if not selected:
        raise DegenerateInputError(f"no samples for dimension {dimension!r}")
    scales = {s.scale_max for s in selected}
    if len(scales) > 1:
        raise ValidationError(
            f"mixed rating scales for dimension {dimension!r}: {sorted(scales)}"
        )
    scale = scales.pop()
    return _pct(float(np.mean([s.value for s in selected])) / scale * 100.0)


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-tailed p-value of the paired-sample t-test (pairs by index)."""
    if len(a) != len(b):
        raise ValidationError("paired samples must have equal length")
    if len(a) < 2:
        raise DegenerateInputError("paired t-test requires at least two pairs")
    diffs = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        raise DegenerateInputError(
            "paired differences have zero variance; the t statistic is undefined"
        )
    n = len(diffs)
    t_stat = float(np.mean(diffs)) / (sd / math.sqrt(n))
    return float(2.0 * stats.t.sf(abs(t_stat), df=n - 1))


def is_significant(p_value: float, alpha: float = SIGNIFICANCE_ALPHA) -> bool:
    return p_value < alpha


# ---------------------------------------------------------------------------
# Report assembly


@dataclass(frozen=True)
class ScenarioInputs:
    """Everything measured for one scenario; every metric is optional."""

    name: str
    positions: PairedPositions | None = None
    occlusion_trials: tuple[OcclusionTrial, ...] | None = None
    latency_trace: LatencyTrace | None = None
    nbi_scores: tuple[RatingSample, ...] | None = None
    lighting: tuple[float, float] | None = None  # (ap_extreme, ap_normal)
    fragment_tags: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] | None = None
    theme: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ScenarioRow:
    name: str
    ce_m: float | None = None
    or_pct: float | None = None
    latency_s: float | None = None
    nbi: float | None = None
    lr_pct: float | None = None
    dt_pct: float | None = None


@dataclass(frozen=True)
class MetaphorRow:
    object_name: str
    ma_pct: float
    sef_pct: float
    md_pct: float


@dataclass(frozen=True)
class StoryEval:
    """Per-dimension percent ratings for each story variant plus pairwise
    p-values keyed like '1v2'."""

    dimensions: tuple[str, ...]
    story_percents: dict[str, dict[str, float]]  # dimension -> story -> pct
    pairwise_p: dict[str, dict[str, float]]  # dimension -> pair -> p


@dataclass(frozen=True)
class MetricReport:
    scenarios: tuple[ScenarioRow, ...] = ()
    metaphor_rows: tuple[MetaphorRow, ...] = ()
    story_eval: StoryEval | None = None
    legend: tuple[str, ...] = LEGEND

    def to_json(self) -> dict:
        doc: dict = {"legend": list(self.legend), "scenarios": []}
        for row in self.scenarios:
            doc["scenarios"].append(
                {
                    "scenario": row.name,
                    "ce_m": row.ce_m,
                    "or_pct": row.or_pct,
                    "latency_s": row.latency_s,
                    "nbi": row.nbi,
                    "lr_pct": row.lr_pct,
                    "dt_pct": row.dt_pct,
                }
            )
        if self.metaphor_rows:
            doc["metaphor"] = [
                {
                    "object": row.object_name,
                    "ma_pct": row.ma_pct,
                    "sef_pct": row.sef_pct,
                    "md_pct": row.md_pct,
                }
                for row in self.metaphor_rows
            ]
        if self.story_eval is not None:
            doc["story_eval"] = {
                "dimensions": list(self.story_eval.dimensions),
                "story_percents": self.story_eval.story_percents,
                "pairwise_p": self.story_eval.pairwise_p,
                "significant": {
                    dim: [pair for pair, p in pairs.items() if is_significant(p)]
                    for dim, pairs in self.story_eval.pairwise_p.items()
                },
            }
        return doc

    def render_text(self) -> str:
        out = io.StringIO()
        for line in self.legend:
            out.write(f"# {line}\n")
        if self.scenarios:
            out.write("\nCross-Scenario Multidimensional Evaluation\n")
            headers = ["Scenario", "CE(m)", "OR(%)", "Latency(s)", "NBI(1-10)", "LR(%)", "DT(%)"]
            rows = [
                [
                    row.name,
                    _cell(row.ce_m, 3),
                    _cell(row.or_pct),
                    _cell(row.latency_s, 2),
                    _cell(row.nbi, 2),
                    _cell(row.lr_pct),
                    _cell(row.dt_pct),
                ]
                for row in self.scenarios
            ]
            out.write(_table(headers, rows))
        if self.metaphor_rows:
            out.write("\nMetaphorical Evaluation\n")
            headers = ["Object", "MA(%)", "SEF(%)", "MD(%)"]
            rows = [
                [row.object_name, _cell(row.ma_pct), _cell(row.sef_pct), _cell(row.md_pct)]
                for row in self.metaphor_rows
            ]
            if len(self.metaphor_rows) > 1:
                rows.append(
                    [
                        "Average",
                        _cell(_pct(float(np.mean([r.ma_pct for r in self.metaphor_rows])))),
                        _cell(_pct(float(np.mean([r.sef_pct for r in self.metaphor_rows])))),
                        _cell(_pct(float(np.mean([r.md_pct for r in self.metaphor_rows])))),
                    ]
                )
            out.write(_table(headers, rows))
        if self.story_eval is not None:
            stories = sorted(
                {s for per in self.story_eval.story_percents.values() for s in per}
            )
            out.write("\nStory Evaluation\n")
            headers = ["Dimension"] + [f"{s}(%)" for s in stories]
            rows = [
                [dim] + [_cell(self.story_eval.story_percents[dim].get(s)) for s in stories]
                for dim in self.story_eval.dimensions
            ]
            out.write(_table(headers, rows))
            pairs = sorted(
                {p for per in self.story_eval.pairwise_p.values() for p in per}
            )
            out.write("\nPairwise T-test Results (p-values; * = p < 0.05)\n")
            headers = ["Dimension"] + pairs
            rows = []
            for dim in self.story_eval.dimensions:
                row = [dim]
                for pair in pairs:
                    p = self.story_eval.pairwise_p.get(dim, {}).get(pair)
                    if p is None:
                        row.append("-")
                    else:
                        row.append(f"{p:.4f}" + ("*" if is_significant(p) else ""))
                rows.append(row)
            out.write(_table(headers, rows))
        return out.getvalue()


def _cell(value: float | None, decimals: int = 1) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip()]
    for row in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def scenario_row(inputs: ScenarioInputs) -> ScenarioRow:
    """Compute one report row, delegating every cell to its standalone op."""
    ce = coordinate_error(inputs.positions) if inputs.positions else None
    or_pct = (
        occlusion_rate(inputs.occlusion_trials) if inputs.occlusion_trials else None
    )
    latency_s = latency(inputs.latency_trace) if inputs.latency_trace else None
    nbi = narrative_break_index(inputs.nbi_scores) if inputs.nbi_scores else None
    lr = lighting_robustness(*inputs.lighting) if inputs.lighting else None
    dt = (
        dynamic_tolerance(inputs.fragment_tags, inputs.theme or ())
        if inputs.fragment_tags
        else None
    )
    return ScenarioRow(inputs.name, ce, or_pct, latency_s, nbi, lr, dt)


METAPHOR_DIMENSIONS = ("MA", "SEF", "MD")


def metaphor_table(samples: Sequence[RatingSample]) -> tuple[MetaphorRow, ...]:
    """Aggregate MA/SEF/MD ratings per object. Samples carry the object name
    in `story` (the grouping tag field)."""
    objects: list[str] = []
    for sample in samples:
        tag = sample.story or ""
        if sample.dimension in METAPHOR_DIMENSIONS and tag and tag not in objects:
            objects.append(tag)
    rows = []
    for obj in objects:
        per_obj = [s for s in samples if (s.story or "") == obj]
        rows.append(
            MetaphorRow(
                obj,
                aggregate_ratings(per_obj, "MA"),
                aggregate_ratings(per_obj, "SEF"),
                aggregate_ratings(per_obj, "MD"),
            )
        )
    return tuple(rows)


def story_eval_table(samples: Sequence[RatingSample]) -> StoryEval:
    """Percent ratings per (dimension, story) plus pairwise paired t-tests.

    Pairing is by rater id: a rater must have rated both stories of a pair
    for that pair to be tested.
    """
    dimensions: list[str] = []
    stories: list[str] = []
    for sample in samples:
        if sample.story is None:
            continue
        if sample.dimension not in dimensions:
            dimensions.append(sample.dimension)
        if sample.story not in stories:
            stories.append(sample.story)
    stories = sorted(stories)
    percents: dict[str, dict[str, float]] = {}
    pairwise: dict[str, dict[str, float]] = {}
    for dim in dimensions:
        per_dim = [s for s in samples if s.dimension == dim and s.story is not None]
        percents[dim] = {
            story: aggregate_ratings([s for s in per_dim if s.story == story], dim)
            for story in stories
        }
        pairwise[dim] = {}
        for i, first in enumerate(stories):
            for second in stories[i + 1:]:
                by_rater_first = {s.rater: s.value for s in per_dim if s.story == first}
                by_rater_second = {s.rater: s.value for s in per_dim if s.story == second}
                raters = sorted(set(by_rater_first) & set(by_rater_second))
                if len(raters) < 2:
                    continue
                label = f"{_story_tag(first)}v{_story_tag(second)}"
                pairwise[dim][label] = paired_ttest(
                    [by_rater_first[r] for r in raters],
                    [by_rater_second[r] for r in raters],
                )
    return StoryEval(tuple(dimensions), percents, pairwise)


def _story_tag(story: str) -> str:
    digits = "".join(ch for ch in story if ch.isdigit())
    return digits or story


def build_report(
    scenarios: Sequence[ScenarioInputs] = (),
    metaphor_ratings: Sequence[RatingSample] = (),
    story_ratings: Sequence[RatingSample] = (),
) -> MetricReport:
    """Assemble the full report; raises when there is nothing to report."""
    if not scenarios and not metaphor_ratings and not story_ratings:
        raise DegenerateInputError("no metric inputs supplied")
    return MetricReport(
        scenarios=tuple(scenario_row(s) for s in scenarios),
        metaphor_rows=metaphor_table(metaphor_ratings) if metaphor_ratings else (),
        story_eval=story_eval_table(story_ratings) if story_ratings else None,
    )


# ---------------------------------------------------------------------------
# File ingestion (CSV ratings, JSONL traces)


def read_ratings_csv(text: str) -> list[RatingSample]:
    """Columns: rater,dimension,value,scale_max plus an optional story/object
    grouping column named `story`."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"rater", "dimension", "value", "scale_max"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValidationError(
            f"ratings CSV must have columns {sorted(required)}, "
            f"got {reader.fieldnames}"
        )
    samples = []
    for i, row in enumerate(reader):
        try:
            samples.append(
                RatingSample(
                    rater=row["rater"],
                    dimension=row["dimension"],
                    value=float(row["value"]),
                    scale_max=float(row["scale_max"]),
                    story=(row.get("story") or None),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"ratings CSV row {i + 2}: {exc}") from exc
    return samples


def read_latency_jsonl(text: str) -> LatencyTrace:
    """One `{"t_event": s, "t_response": s}` object per line."""
    events = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            events.append((float(doc["t_event"]), float(doc["t_response"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"latency JSONL line {i + 1}: {exc}") from exc
    return LatencyTrace(tuple(events))


def read_occlusion_jsonl(text: str) -> tuple[OcclusionTrial, ...]:
    """One `{"tier": "T30"|"T60"|"T90", "correct": bool}` object per line."""
    trials = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            trials.append(OcclusionTrial(OcclusionTier[doc["tier"]], bool(doc["correct"])))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"occlusion JSONL line {i + 1}: {exc}") from exc
    return tuple(trials)


def read_positions_jsonl(text: str) -> PairedPositions:
    """One `{"true": [x,y,z], "detected": [x,y,z]}` object per line."""
    pairs = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            pairs.append((tuple(map(float, doc["true"])), tuple(map(float, doc["detected"]))))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"positions JSONL line {i + 1}: {exc}") from exc
    return PairedPositions(tuple(pairs))
