"""Answer comparison functions: token F1, embedding similarity, answerability.

Normalization follows the SQuAD evaluation convention (lowercase, strip
punctuation, drop articles, collapse whitespace). The embedding component is
delegated to a backend similarity callable; this module only combines and
clamps.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ComponentUnavailable

COMPONENTS = ("f1", "embedding", "answerability")
ANSWERABILITY_SIDES = ("context", "candidate", "min", "mean")

UNANSWERABLE = "unanswerable"

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class NormalizedAnswer:
    tokens: tuple[str, ...]

    def __bool__(self) -> bool:
        return bool(self.tokens)


def normalize_answer(text: str) -> NormalizedAnswer:
    """Lowercase, strip punctuation, remove articles, collapse whitespace."""
    lowered = text.lower()
    no_punct = "".join(ch for ch in lowered if ch not in _PUNCT)
    no_articles = _ARTICLES_RE.sub(" ", no_punct)
    return NormalizedAnswer(tuple(no_articles.split()))


def token_f1(a: str, b: str) -> float:
    """Multiset-overlap F1 on normalized tokens.

    Both sides empty after normalization -> 1.0; exactly one empty -> 0.0.
    """
    a_tokens = normalize_answer(a).tokens
    b_tokens = normalize_answer(b).tokens
    if not a_tokens or not b_tokens:
        return float(a_tokens == b_tokens)
    overlap = sum((Counter(a_tokens) & Counter(b_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(a_tokens)
    recall = overlap / len(b_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class SimilarityConfig:
    """Which comparison functions are enabled and how they are combined."""

    components: tuple[str, ...] = COMPONENTS
    clamp: bool = True
    answerability_side: str = "context"

    def __post_init__(self):
        if not self.components:
            raise ValueError("at least one similarity component must be enabled")
        unknown = [c for c in self.components if c not in COMPONENTS]
        if unknown:
            raise ValueError(f"unknown similarity components: {unknown}")
        if len(set(self.components)) != len(self.components):
            raise ValueError("duplicate similarity components")
        if self.answerability_side not in ANSWERABILITY_SIDES:
            raise ValueError(f"answerability_side must be one of {ANSWERABILITY_SIDES}")


@dataclass(frozen=True)
class SimilarityBreakdown:
    """Per-question component values; mean covers exactly the present ones."""

    f1: float | None
    embedding: float | None
    answerability: float | None
    mean: float = field(default=0.0)

    @classmethod
    def build(
        cls,
        f1: float | None,
        embedding: float | None,
        answerability: float | None,
    ) -> "SimilarityBreakdown":
        present = [v for v in (f1, embedding, answerability) if v is not None]
        if not present:
            raise ValueError("breakdown needs at least one component")
        return cls(f1=f1, embedding=embedding, answerability=answerability,
                   mean=sum(present) / len(present))

    def to_json(self) -> dict:
        return {
            "f1": self.f1,
            "embedding": self.embedding,
            "answerability": self.answerability,
            "mean": self.mean,
        }


def answerability(record) -> float:
    """1 - p_unanswerable of an answer record."""
    return 1.0 - record.p_unanswerable


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def compose(
    a_candidate,
    a_context,
    config: SimilarityConfig = SimilarityConfig(),
    similarity: Callable[[str, str], float] | None = None,
) -> SimilarityBreakdown:
    """Compare the candidate-side and context-side answers of one question.

    ``similarity`` is the backend embedding oracle; required only when the
    embedding component is enabled.
    """
    f1_val = emb_val = ans_val = None
    if "f1" in config.components:
        f1_val = token_f1(a_candidate.answer_text, a_context.answer_text)
    if "embedding" in config.components:
        if similarity is None:
            raise ComponentUnavailable("embedding component enabled but no similarity backend")
        emb_val = similarity(a_candidate.answer_text, a_context.answer_text)
        if config.clamp:
            emb_val = _clamp01(emb_val)
    if "answerability" in config.components:
        side = config.answerability_side
        ctx = answerability(a_context)
        cand = answerability(a_candidate)
        if side == "context":
            ans_val = ctx
        elif side == "candidate":
            ans_val = cand
        elif side == "min":
            ans_val = min(ctx, cand)
        else:
            ans_val = (ctx + cand) / 2.0
    return SimilarityBreakdown.build(f1_val, emb_val, ans_val)


def mean_of(values: Iterable[float]) -> float:
    vals: Sequence[float] = list(values)
    return sum(vals) / len(vals)
