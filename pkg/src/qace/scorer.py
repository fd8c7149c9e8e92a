"""Caption scoring: questions from the candidate, answers from both sides.

The score of a caption against a context (reference text or image) is the
per-question mean of answer-similarity values; per-function means are
averaged into the final number. Multi-reference scoring averages the
component means over references, excluding undefined ones.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .answersim import SimilarityBreakdown, SimilarityConfig, compose, mean_of
from .chunker import AnswerSpan, ChunkLexicon, extract_spans
from .errors import NoReferences, QaceError
from .gateway import AnswerRecord, Gateway

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    """Everything that shapes a scoring run besides the backend itself."""

    similarity: SimilarityConfig = SimilarityConfig()
    candidate_answer: str = "qa"  # "qa": ask the QA model on the candidate; "span": reuse the span
    answer_form: str = "span"  # "span": full noun phrase; "head": head noun only
    use_backend_chunker: bool = False
    lexicon: ChunkLexicon | None = None
    workers: int = 1

    def __post_init__(self):
        if self.candidate_answer not in ("qa", "span"):
            raise ValueError(f"candidate_answer must be qa/span, got {self.candidate_answer!r}")
        if self.answer_form not in ("span", "head"):
            raise ValueError(f"answer_form must be span/head, got {self.answer_form!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class EvaluationInstance:
    """One candidate caption plus its scoring context."""

    instance_id: str
    candidate: str
    references: tuple[str, ...] = ()
    image_id: str | None = None
    human_score: float | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "EvaluationInstance":
        return cls(
            instance_id=str(obj["instance_id"]),
            candidate=obj["candidate"],
            references=tuple(obj.get("references") or ()),
            image_id=(None if obj.get("image_id") is None else str(obj["image_id"])),
            human_score=(None if obj.get("human_score") is None else float(obj["human_score"])),
        )

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "candidate": self.candidate,
            "references": list(self.references),
            "image_id": self.image_id,
            "human_score": self.human_score,
        }


@dataclass(frozen=True)
class QuestionResult:
    question: str
    source_span: AnswerSpan
    answer_on_candidate: AnswerRecord
    answer_on_context: AnswerRecord
    breakdown: SimilarityBreakdown

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "source_span": self.source_span.to_payload(),
            "answer_on_candidate": self.answer_on_candidate.to_json(),
            "answer_on_context": self.answer_on_context.to_json(),
            "breakdown": self.breakdown.to_json(),
        }


@dataclass(frozen=True)
class QaceScore:
    """Aggregate score plus everything needed to re-derive it."""

    per_question: tuple[QuestionResult, ...]
    M: int
    qace_f1: float | None
    qace_embedding: float | None
    qace_answerability: float | None
    qace: float | None
    defined: bool
    per_reference: tuple["QaceScore", ...] | None = None

    def to_json(self) -> dict:
        out = {
            "M": self.M,
            "defined": self.defined,
            "qace": self.qace,
            "qace_f1": self.qace_f1,
            "qace_embedding": self.qace_embedding,
            "qace_answerability": self.qace_answerability,
            "per_question": [q.to_json() for q in self.per_question],
        }
        if self.per_reference is not None:
            out["per_reference"] = [r.to_json() for r in self.per_reference]
        return out


def undefined_score() -> QaceScore:
    return QaceScore(
        per_question=(),
        M=0,
        qace_f1=None,
        qace_embedding=None,
        qace_answerability=None,
        qace=None,
        defined=False,
    )


def aggregate_questions(
    results: list[QuestionResult] | tuple[QuestionResult, ...],
    config: SimilarityConfig = SimilarityConfig(),
) -> QaceScore:
    """Fold per-question breakdowns into a QaceScore (pure, order-free)."""
    results = tuple(results)
    if not results:
        return undefined_score()
    f1 = emb = ans = None
    function_means: list[float] = []
    if "f1" in config.components:
        f1 = mean_of(r.breakdown.f1 for r in results)
        function_means.append(f1)
    if "embedding" in config.components:
        emb = mean_of(r.breakdown.embedding for r in results)
        function_means.append(emb)
    if "answerability" in config.components:
        ans = mean_of(r.breakdown.answerability for r in results)
        function_means.append(ans)
    return QaceScore(
        per_question=results,
        M=len(results),
        qace_f1=f1,
        qace_embedding=emb,
        qace_answerability=ans,
        qace=mean_of(function_means),
        defined=True,
    )


def aggregate_reference_scores(scores: list[QaceScore]) -> QaceScore:
    """Component-wise mean over per-reference scores, skipping undefined ones."""
    defined = [s for s in scores if s.defined]
    if not defined:
        return replace(undefined_score(), per_reference=tuple(scores))

    def comp_mean(values: list[float | None]) -> float | None:
        present = [v for v in values if v is not None]
        return mean_of(present) if present else None

    return QaceScore(
        per_question=(),
        M=defined[0].M,
        qace_f1=comp_mean([s.qace_f1 for s in defined]),
        qace_embedding=comp_mean([s.qace_embedding for s in defined]),
        qace_answerability=comp_mean([s.qace_answerability for s in defined]),
        qace=comp_mean([s.qace for s in defined]),
        defined=True,
        per_reference=tuple(scores),
    )


def _candidate_spans(candidate: str, gateway: Gateway, config: EngineConfig) -> list[AnswerSpan]:
    if config.use_backend_chunker:
        return gateway.extract_spans(candidate)
    return extract_spans(candidate, answer_form=config.answer_form, lexicon=config.lexicon)


def _candidate_record(
    question: str, span: AnswerSpan, candidate: str, gateway: Gateway, config: EngineConfig
) -> AnswerRecord:
    if config.candidate_answer == "span":
        return AnswerRecord(
            answer_text=span.text,
            p_unanswerable=0.0,
            context_kind="candidate",
            backend_id="span",
        )
    return gateway.answer_text(question, candidate, kind="candidate")


def _score_with_context(
    candidate: str,
    answer_on_context,
    gateway: Gateway,
    config: EngineConfig,
) -> QaceScore:
    spans = _candidate_spans(candidate, gateway, config)
    if not spans:
        log.warning("no noun-phrase candidates in caption %r; score undefined", candidate)
        return undefined_score()
    question_set = gateway.generate_questions(candidate, spans)

    def one(item: tuple[str, AnswerSpan]) -> QuestionResult:
        question, span = item
        on_candidate = _candidate_record(question, span, candidate, gateway, config)
        on_context = answer_on_context(question)
        breakdown = compose(on_candidate, on_context, config.similarity, gateway.similarity)
        return QuestionResult(
            question=question,
            source_span=span,
            answer_on_candidate=on_candidate,
            answer_on_context=on_context,
            breakdown=breakdown,
        )

    if config.workers > 1 and question_set.M > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(one, question_set.questions))
    else:
        results = [one(item) for item in question_set.questions]
    return aggregate_questions(results, config.similarity)


def score_against_reference(
    candidate: str,
    reference: str,
    gateway: Gateway,
    config: EngineConfig = EngineConfig(),
) -> QaceScore:
    """Score a candidate with a reference caption as context."""
    return _score_with_context(
        candidate,
        lambda question: gateway.answer_text(question, reference, kind="reference"),
        gateway,
        config,
    )


def score_against_image(
    candidate: str,
    image_id: str,
    gateway: Gateway,
    config: EngineConfig = EngineConfig(),
) -> QaceScore:
    """Reference-less scoring: the context side is visual QA on the image."""
    return _score_with_context(
        candidate,
        lambda question: gateway.answer_visual(question, image_id),
        gateway,
        config,
    )


def score_multi_reference(
    candidate: str,
    references: list[str] | tuple[str, ...],
    gateway: Gateway,
    config: EngineConfig = EngineConfig(),
) -> QaceScore:
    """Mean of single-reference scores, per-reference results retained."""
    if not references:
        raise NoReferences("at least one reference is required")
    per_reference: list[QaceScore] = []
    for i, reference in enumerate(references):
        if not reference or not reference.strip():
            log.warning("reference %d is empty; excluded from the mean", i)
            per_reference.append(undefined_score())
            continue
        per_reference.append(score_against_reference(candidate, reference, gateway, config))
    return aggregate_reference_scores(per_reference)


@dataclass
class BatchResult:
    scores: dict[str, QaceScore] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def summary(self) -> dict:
        defined = [s for s in self.scores.values() if s.defined]
        undefined = len(self.scores) - len(defined)
        # Undefined scores count as 0.0 in batch statistics.
        values = [s.qace for s in defined] + [0.0] * undefined
        return {
            "instances": len(self.scores) + len(self.failures),
            "scored": len(self.scores),
            "failed": sorted(self.failures),
            "undefined": undefined,
            "mean_qace": (sum(values) / len(values)) if values else None,
        }


def score_batch(
    instances: list[EvaluationInstance],
    mode: str,
    gateway: Gateway,
    config: EngineConfig = EngineConfig(),
) -> BatchResult:
    """Score every instance; per-instance errors are recorded, not raised."""
    if mode not in ("ref", "img"):
        raise ValueError(f"mode must be 'ref' or 'img', got {mode!r}")
    result = BatchResult()
    # Parallelism is applied across instances here; avoid nested pools.
    inner = replace(config, workers=1) if config.workers > 1 else config

    def one(instance: EvaluationInstance) -> tuple[str, QaceScore | None, str | None]:
        try:
            if mode == "ref":
                refs = instance.references
                if not refs:
                    raise NoReferences(f"instance {instance.instance_id} has no references")
                if len(refs) == 1:
                    score = score_against_reference(instance.candidate, refs[0], gateway, inner)
                else:
                    score = score_multi_reference(instance.candidate, refs, gateway, inner)
            else:
                if instance.image_id is None:
                    raise QaceError(f"instance {instance.instance_id} has no image_id")
                score = score_against_image(instance.candidate, instance.image_id, gateway, inner)
            return instance.instance_id, score, None
        except QaceError as exc:
            return instance.instance_id, None, f"{type(exc).__name__}: {exc}"

    if config.workers > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(one, instances))
    else:
        outcomes = [one(instance) for instance in instances]
    for instance_id, score, error in outcomes:
        if error is None:
            assert score is not None
            result.scores[instance_id] = score
        else:
            log.warning("instance %s failed: %s", instance_id, error)
            result.failures[instance_id] = error
    return result
