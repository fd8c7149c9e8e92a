"""Synthetic abstractive-VQA training data from captioned images.

Question/answer pairs are generated from caption noun phrases, kept only when
the textual QA model recovers the extracted answer (round-trip consistency),
attached to their image, topped up with negative-sampled unanswerable
questions, and split train/validation by image so no image straddles the
boundary. Everything is deterministic given (corpus, backend script, seed).

Duplicate questions arising from different captions of one image are kept:
their provenance differs and the round-trip filter judges each on its own
caption.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable

from .answersim import UNANSWERABLE, normalize_answer, token_f1
from .chunker import AnswerSpan, extract_spans
from .errors import NegativeSamplingImpossible, NoAnswerCandidates, SchemaViolation
from .gateway import Gateway
from .scorer import EngineConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaptionedImage:
    image_id: str
    captions: tuple[str, ...]

    def __post_init__(self):
        if not self.captions:
            raise ValueError(f"image {self.image_id!r} has no captions")


@dataclass(frozen=True)
class RoundTripMatch:
    """Round-trip acceptance rule: normalized exact match or an F1 floor."""

    kind: str = "exact"
    threshold: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "RoundTripMatch":
        if text == "exact":
            return cls()
        if text.startswith("f1:"):
            threshold = float(text[len("f1:"):])
            if not (0.0 < threshold <= 1.0):
                raise ValueError(f"f1 threshold must be in (0,1], got {threshold}")
            return cls(kind="f1", threshold=threshold)
        raise ValueError(f"match rule must be 'exact' or 'f1:<t>', got {text!r}")

    def accepts(self, extracted: str, predicted: str) -> bool:
        if self.kind == "exact":
            return normalize_answer(predicted) == normalize_answer(extracted)
        return token_f1(predicted, extracted) >= self.threshold


@dataclass(frozen=True)
class SyntheticTriple:
    question: str
    answer: str
    image_id: str
    provenance: dict

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "image_id": self.image_id,
            "provenance": self.provenance,
        }


@dataclass
class RoundTripReport:
    generated: int = 0
    kept: int = 0
    filtered: int = 0
    captions: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "generated": self.generated,
            "kept": self.kept,
            "filtered": self.filtered,
            "captions": self.captions,
        }


def load_corpus(path) -> list[CaptionedImage]:
    """Read a JSON-lines corpus of {"image_id", "captions": [...]} records."""
    corpus: list[CaptionedImage] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                image = CaptionedImage(
                    image_id=str(obj["image_id"]), captions=tuple(obj["captions"])
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaViolation(f"bad corpus record ({exc})", line=lineno)
            if image.image_id in seen:
                raise SchemaViolation(f"duplicate image_id {image.image_id!r}", line=lineno)
            seen.add(image.image_id)
            corpus.append(image)
    return corpus


def build_qa_pairs(
    caption: str,
    gateway: Gateway,
    config: EngineConfig = EngineConfig(),
) -> list[tuple[str, AnswerSpan]]:
    """One (question, answer span) pair per deduped noun phrase."""
    if config.use_backend_chunker:
        spans = gateway.extract_spans(caption)
    else:
        spans = extract_spans(caption, answer_form=config.answer_form, lexicon=config.lexicon)
    if not spans:
        log.info("caption skipped, no noun phrases: %r", caption)
        return []
    try:
        question_set = gateway.generate_questions(caption, spans)
    except NoAnswerCandidates:
        return []
    return list(question_set.questions)


def round_trip_filter(
    pairs: list[tuple[str, AnswerSpan]],
    caption: str,
    gateway: Gateway,
    match: RoundTripMatch = RoundTripMatch(),
) -> tuple[list[tuple[str, AnswerSpan]], RoundTripReport]:
    """Keep pairs whose question, asked on the source caption, gets the span back."""
    report = RoundTripReport(generated=len(pairs))
    kept: list[tuple[str, AnswerSpan]] = []
    details: list[dict] = []
    for question, span in pairs:
        record = gateway.answer_text(question, caption, kind="reference")
        accepted = match.accepts(span.text, record.answer_text)
        details.append(
            {
                "question": question,
                "answer": span.text,
                "tqa_answer": record.answer_text,
                "kept": accepted,
            }
        )
        if accepted:
            kept.append((question, span))
    report.kept = len(kept)
    report.filtered = report.generated - report.kept
    report.captions.append({"caption": caption, "pairs": details})
    return kept, report


def _derived_rng(seed: int, stream: str) -> random.Random:
    return random.Random(f"{seed}:{stream}")


def assemble_dataset(
    corpus: list[CaptionedImage],
    gateway: Gateway,
    unanswerable_ratio: float = 0.2,
    seed: int = 0,
    match: RoundTripMatch = RoundTripMatch(),
    ratio_base: str = "final",
    config: EngineConfig = EngineConfig(),
) -> tuple[list[SyntheticTriple], RoundTripReport]:
    """Answerable triples plus negative-sampled unanswerable ones, shuffled.

    ``ratio_base="final"`` reads the ratio as the unanswerable share of the
    finished set; ``"answerable"`` as a fraction of the answerable count.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if not (0.0 <= unanswerable_ratio < 1.0):
        raise ValueError(f"unanswerable_ratio must be in [0,1), got {unanswerable_ratio}")
    if ratio_base not in ("final", "answerable"):
        raise ValueError(f"ratio_base must be final/answerable, got {ratio_base!r}")
    if unanswerable_ratio > 0.0 and len({img.image_id for img in corpus}) < 2:
        raise NegativeSamplingImpossible(
            "negative sampling needs at least two distinct images"
        )

    report = RoundTripReport()
    answerable: list[SyntheticTriple] = []
    for image in corpus:
        for caption in image.captions:
            pairs = build_qa_pairs(caption, gateway, config)
            kept, caption_report = round_trip_filter(pairs, caption, gateway, match)
            report.generated += caption_report.generated
            report.kept += caption_report.kept
            report.filtered += caption_report.filtered
            for entry in caption_report.captions:
                report.captions.append({"image_id": image.image_id, **entry})
            for question, span in kept:
                answerable.append(
                    SyntheticTriple(
                        question=question,
                        answer=span.text,
                        image_id=image.image_id,
                        provenance={
                            "source_caption": caption,
                            "source_span": span.to_payload(),
                        },
                    )
                )

    n_answerable = len(answerable)
    if ratio_base == "final":
        n_unanswerable = round(
            unanswerable_ratio * n_answerable / (1.0 - unanswerable_ratio)
        )
    else:
        n_unanswerable = round(unanswerable_ratio * n_answerable)

    triples = list(answerable)
    if n_unanswerable > 0:
        image_ids = [img.image_id for img in corpus]
        rng = _derived_rng(seed, "negatives")
        for _ in range(n_unanswerable):
            source = answerable[rng.randrange(n_answerable)]
            others = [i for i in image_ids if i != source.image_id]
            target = others[rng.randrange(len(others))]
            triples.append(
                SyntheticTriple(
                    question=source.question,
                    answer=UNANSWERABLE,
                    image_id=target,
                    provenance={"negative_sampled_from": source.image_id},
                )
            )
    _derived_rng(seed, "shuffle").shuffle(triples)
    return triples, report


def split(
    dataset: list[SyntheticTriple],
    train_fraction: float = 0.9,
    seed: int = 0,
) -> tuple[list[SyntheticTriple], list[SyntheticTriple]]:
    """Image-disjoint train/validation split, sizes near n*fraction."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
    groups: dict[str, list[SyntheticTriple]] = {}
    for triple in dataset:
        groups.setdefault(triple.image_id, []).append(triple)
    image_ids = list(groups)
    _derived_rng(seed, "split").shuffle(image_ids)
    target = int(len(dataset) * train_fraction + 0.5)
    train: list[SyntheticTriple] = []
    validation: list[SyntheticTriple] = []
    for image_id in image_ids:
        bucket = train if len(train) < target else validation
        bucket.extend(groups[image_id])
    return train, validation


def write_jsonl(path, triples: Iterable[SyntheticTriple]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for triple in triples:
            f.write(json.dumps(triple.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
