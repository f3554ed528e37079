"""End-to-end pipeline: extract, inject, mask, answer, evaluate.

The full path per question: identify key entities, generate state records,
inject non-spatial knowledge into events, build the omniscient and
character scene graphs, fold the belief chain's masks, reduce the question
to first order, and read the answer. Two ablation switches reproduce the
"no knowledge injection" and "no iterative masking" variants; with masking
off the reader sees the whole story and fails on false-belief questions,
which is the point.
"""

from __future__ import annotations

import json
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ValidationError
from .inject import AugmentedEvent, inject
from .nkb import (
    EntityStateRecord,
    LOCATION,
    RuleBackend,
    StateBackend,
    extract_locations,
    generate_states,
    identify_key_entities,
)
from .question import ToMQuestion, answer_space_for, reduce_order
from .scene import (
    MaskedView,
    SceneGraph,
    build_character_graph,
    build_omniscient_graph,
    graph_build_counts,
    mask_chain,
    retrieve_events,
)
from .story import Story
from .textnorm import is_negated_place, normalize_answer, normalize_place

ABSTAIN = "<abstain>"

_ANSWER_SPAN = re.compile(r"<answer>((?:(?!</?answer>).)*)</answer>", re.IGNORECASE | re.DOTALL)


@dataclass
class PipelineConfig:
    """Which backends run and which stages stay on."""

    nkb_backend: StateBackend | None = None
    answer_backend: object = None  # None = the symbolic reader
    inject_knowledge: bool = True  # off = the "w/o KI" ablation
    apply_masking: bool = True  # off = the "w/o IM" ablation
    reduce_orders: bool = True

    def backend(self) -> StateBackend:
        if self.nkb_backend is None:
            self.nkb_backend = RuleBackend()
        return self.nkb_backend


@dataclass
class StoryArtifacts:
    """Everything computable once per story and shared across its questions."""

    story: Story
    targets: list
    records: list[EntityStateRecord]
    anchors: list
    augmented: list[AugmentedEvent]
    omniscient: SceneGraph
    _char_graphs: dict[str, SceneGraph] = field(default_factory=dict)

    def character_graph(self, name: str) -> SceneGraph:
        key = name.casefold()
        if key not in self._char_graphs:
            self._char_graphs[key] = build_character_graph(
                self.story, self.records, self.anchors, name, self.omniscient
            )
        return self._char_graphs[key]

    def view_texts(self, with_knowledge: bool) -> list[str]:
        if with_knowledge:
            return [a.render(numbered=True) for a in self.augmented]
        return [f"{e.index}: {e.text}" for e in self.story.events]


@dataclass(frozen=True)
class QuestionOutcome:
    predicted: str
    empty_view: bool = False
    flagged: bool = False


def prepare_story(story: Story, questions: list[ToMQuestion], cfg: PipelineConfig) -> StoryArtifacts:
    backend = cfg.backend()
    targets = identify_key_entities(story, questions, backend)
    records = generate_states(story, targets, backend)
    anchors = extract_locations(story, backend)
    augmented = inject(story, records)
    omniscient = build_omniscient_graph(story, records, anchors)
    return StoryArtifacts(
        story=story,
        targets=targets,
        records=records,
        anchors=anchors,
        augmented=augmented,
        omniscient=omniscient,
    )


def answer_question(artifacts: StoryArtifacts, q: ToMQuestion, cfg: PipelineConfig) -> QuestionOutcome:
    masked = artifacts.omniscient
    if cfg.apply_masking and q.order >= 1:
        masked = mask_chain(
            artifacts.omniscient, [artifacts.character_graph(c) for c in q.chain_names]
        )
    view = retrieve_events(masked, artifacts.view_texts(cfg.inject_knowledge), chain=q.chain_names)
    empty_view = not view.surviving

    asked = q
    if cfg.reduce_orders and q.order >= 1:
        asked = reduce_order(q)

    if cfg.answer_backend is None:
        predicted = symbolic_reader(view, asked, artifacts.records)
        flagged = predicted == ABSTAIN
    else:
        space = asked.answer_space or tuple(
            answer_space_for(asked, artifacts.story, artifacts.records)
        )
        raw = cfg.answer_backend.answer(view, asked, space)
        parsed = parse_answer(raw, space or None)
        predicted, flagged = parsed.value, parsed.flagged or parsed.ambiguous
    return QuestionOutcome(predicted=predicted, empty_view=empty_view, flagged=flagged)


def run_pipeline(story: Story, q: ToMQuestion, cfg: PipelineConfig | None = None) -> str:
    """Answer one question; order-0 questions skip masking by construction."""
    cfg = cfg or PipelineConfig()
    artifacts = prepare_story(story, [q], cfg)
    return answer_question(artifacts, q, cfg).predicted


def symbolic_reader(view: MaskedView, q: ToMQuestion, records: list[EntityStateRecord]) -> str:
    """Deterministic reader: the last surviving state of the question's
    target, falling back to its initial declaration, normalized against the
    answer space when one is present."""
    target = q.target_entity.casefold()
    relevant = [
        r
        for r in records
        if r.entity.casefold() == target and r.attribute.casefold() == q.target_attribute.casefold()
    ]
    if not relevant:
        return ABSTAIN
    if q.asks_initial:
        chosen = relevant[0]
    else:
        surviving = set(view.surviving)
        in_view = [r for r in relevant if r.event_index in surviving]
        chosen = in_view[-1] if in_view else relevant[0]
    value = _state_to_answer(chosen.state, q.target_attribute)
    if q.answer_space:
        matched, ambiguous = match_candidates(value, q.answer_space)
        if matched is not None and not ambiguous:
            return matched
    return value


def _state_to_answer(state: str, attribute: str) -> str:
    if attribute.casefold() == LOCATION and not is_negated_place(state):
        return normalize_place(state)
    return state.strip()


def match_candidates(value: str, space) -> tuple[str | None, bool]:
    """(candidate, ambiguous): exact normalized match first, then a unique
    substring match in either direction."""
    normalized = normalize_answer(value)
    exact = [c for c in space if normalize_answer(c) == normalized]
    if len(exact) == 1:
        return exact[0], False
    if len(exact) > 1:
        return None, True
    partial = [
        c
        for c in space
        if normalize_answer(c)
        and (normalize_answer(c) in normalized or normalized in normalize_answer(c))
    ]
    if len(partial) == 1:
        return partial[0], False
    return None, len(partial) > 1


@dataclass(frozen=True)
class ParsedAnswer:
    value: str
    flagged: bool = False
    ambiguous: bool = False


def parse_answer(llm_text: str, space=None) -> ParsedAnswer:
    """Total answer extractor for model output.

    The innermost, last ``<answer>...</answer>`` span wins. Without a
    complete pair, text after the last opening tag is used when one exists,
    else the last non-empty line; both fallbacks are flagged. Candidates,
    when given, match exactly (normalized) or by unique substring; an
    ambiguous match keeps the raw extraction and is flagged ambiguous.
    """
    text = llm_text or ""
    flagged = False
    spans = _ANSWER_SPAN.findall(text)
    if spans:
        extracted = spans[-1].strip()
    elif "<answer>" in text.casefold():
        tail = re.split(r"<answer>", text, flags=re.IGNORECASE)[-1]
        extracted = re.sub(r"</answer>.*", "", tail, flags=re.IGNORECASE | re.DOTALL).strip()
        flagged = True
    else:
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        extracted = lines[-1] if lines else ""
        flagged = True

    if space:
        matched, ambiguous = match_candidates(extracted, space)
        if matched is not None:
            return ParsedAnswer(value=matched, flagged=flagged)
        return ParsedAnswer(value=extracted.casefold().strip(), flagged=True, ambiguous=ambiguous)
    return ParsedAnswer(value=extracted.casefold().strip(), flagged=flagged)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class QuestionRow:
    seed: int
    story_index: int
    question: str
    order: int
    predicted: str
    gold: str | None
    correct: bool | None
    empty_view: bool
    flagged: bool


@dataclass
class EvalReport:
    rows: list[QuestionRow]
    seed_accuracies: dict[int, float]
    per_order: dict[int, float]
    graph_counts: dict
    skipped: int

    @property
    def accuracy_mean(self) -> float:
        values = list(self.seed_accuracies.values())
        return statistics.fmean(values) if values else 0.0

    @property
    def accuracy_variance(self) -> float | None:
        values = list(self.seed_accuracies.values())
        return statistics.pvariance(values) if len(values) >= 2 else None

    def to_json(self) -> str:
        payload = {
            "accuracy_mean": self.accuracy_mean,
            "accuracy_variance": self.accuracy_variance,
            "seed_accuracies": {str(k): v for k, v in sorted(self.seed_accuracies.items())},
            "per_order": {str(k): v for k, v in sorted(self.per_order.items())},
            "graph_counts": self.graph_counts,
            "skipped": self.skipped,
            "questions": [
                {
                    "seed": r.seed,
                    "story_index": r.story_index,
                    "question": r.question,
                    "order": r.order,
                    "predicted": r.predicted,
                    "gold": r.gold,
                    "correct": r.correct,
                    "empty_view": r.empty_view,
                    "flagged": r.flagged,
                }
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def table(self) -> str:
        lines = [
            f"questions: {len(self.rows)}  skipped (no gold): {self.skipped}",
            f"accuracy: mean={self.accuracy_mean:.4f}"
            + (
                f" variance={self.accuracy_variance:.6f}"
                if self.accuracy_variance is not None
                else ""
            ),
            "per-order accuracy:",
        ]
        for order, acc in sorted(self.per_order.items()):
            lines.append(f"  order {order}: {acc:.4f}")
        gc = self.graph_counts
        lines.append(
            f"graphs built (m={gc['m']}, k={gc['k']}): "
            f"{gc['scene_graphs']} scene graphs vs {gc['chain_graphs']} per-chain belief graphs"
        )
        return "\n".join(lines)


def answers_match(predicted: str, gold: str) -> bool:
    return normalize_answer(predicted) == normalize_answer(gold)


def evaluate(
    items: list[tuple[Story, list[ToMQuestion]]],
    cfg: PipelineConfig | None = None,
    seeds: list[int] | None = None,
    subset_size: int | None = None,
    workers: int = 1,
) -> EvalReport:
    """Run the pipeline over seeded story subsets and report accuracy.

    Each seed samples its own subset (the whole set when subset_size is
    None); the mean and variance are taken over the per-seed accuracies.
    Questions without gold answers are skipped and counted.
    """
    import random

    cfg = cfg or PipelineConfig()
    seeds = list(seeds) if seeds else [0]

    rows: list[QuestionRow] = []
    skipped = 0
    seed_accuracies: dict[int, float] = {}
    max_m = 1
    max_k = 0

    for seed in seeds:
        indexed = list(enumerate(items))
        if subset_size is not None and subset_size < len(indexed):
            indexed = random.Random(seed).sample(indexed, subset_size)

        def eval_story(pair):
            story_index, (story, questions) = pair
            artifacts = prepare_story(story, questions, cfg)
            story_rows = []
            for q in questions:
                if q.gold is None:
                    story_rows.append(None)
                    continue
                outcome = answer_question(artifacts, q, cfg)
                story_rows.append(
                    QuestionRow(
                        seed=seed,
                        story_index=story_index,
                        question=q.raw,
                        order=q.order,
                        predicted=outcome.predicted,
                        gold=q.gold,
                        correct=answers_match(outcome.predicted, q.gold),
                        empty_view=outcome.empty_view,
                        flagged=outcome.flagged,
                    )
                )
            return story_rows

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(eval_story, indexed))
        else:
            results = [eval_story(pair) for pair in indexed]

        seed_rows = []
        for story_rows in results:
            for row in story_rows:
                if row is None:
                    skipped += 1
                else:
                    seed_rows.append(row)
        rows.extend(seed_rows)
        scored = [r for r in seed_rows if r.correct is not None]
        seed_accuracies[seed] = (
            sum(r.correct for r in scored) / len(scored) if scored else 0.0
        )
        for story_index, (story, questions) in indexed:
            max_m = max(max_m, len(story.characters))
            max_k = max([max_k] + [q.order for q in questions])

    per_order: dict[int, float] = {}
    for order in sorted({r.order for r in rows}):
        scored = [r for r in rows if r.order == order]
        per_order[order] = sum(r.correct for r in scored) / len(scored) if scored else 0.0

    counts = graph_build_counts(max_m, min(max_k, max_m))
    return EvalReport(
        rows=rows,
        seed_accuracies=seed_accuracies,
        per_order=per_order,
        graph_counts={
            "m": max_m,
            "k": min(max_k, max_m),
            "scene_graphs": counts.scene_graphs,
            "chain_graphs": counts.chain_graphs,
        },
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Complexity report


@dataclass(frozen=True)
class ComplexityRow:
    m: int
    k: int
    scene_graphs: int
    chain_graphs: int


def complexity_report(m_range, k_range) -> list[ComplexityRow]:
    """Graph-count rows for every (m, k) pair with k <= m."""
    rows = []
    for m in m_range:
        for k in k_range:
            if k > m:
                continue
            counts = graph_build_counts(m, k)
            rows.append(
                ComplexityRow(
                    m=m, k=k, scene_graphs=counts.scene_graphs, chain_graphs=counts.chain_graphs
                )
            )
    if not rows:
        raise ValidationError("empty complexity report: no (m, k) pair with k <= m")
    return rows


def complexity_table(rows: list[ComplexityRow]) -> str:
    lines = ["  m  k  scene-graphs  per-chain-graphs"]
    for row in rows:
        lines.append(f"{row.m:>3} {row.k:>2} {row.scene_graphs:>13} {row.chain_graphs:>17}")
    return "\n".join(lines)


def complexity_csv(rows: list[ComplexityRow]) -> str:
    lines = ["m,k,scene_graphs,chain_graphs"]
    for row in rows:
        lines.append(f"{row.m},{row.k},{row.scene_graphs},{row.chain_graphs}")
    return "\n".join(lines) + "\n"
