"""Question-answering based caption evaluation.

Questions are generated from a candidate caption's noun phrases and answered
against the caption itself and against a context (a reference caption or the
source image); answer agreement, averaged over questions, is the score. The
package also builds synthetic abstractive-VQA training data and ships a
meta-evaluation harness (Kendall tau-b, Pascal50s accuracy, significance).
"""

from .answersim import (
    SimilarityBreakdown,
    SimilarityConfig,
    answerability,
    compose,
    normalize_answer,
    token_f1,
)
from .chunker import (
    AnswerSpan,
    ChunkLexicon,
    PosToken,
    dedupe_spans,
    extract_noun_phrases,
    extract_spans,
    tag_tokens,
)
from .gateway import (
    AnswerRecord,
    Gateway,
    HeuristicBackend,
    MockBackend,
    QuestionSet,
    TcpBackend,
    build_backend,
)
from .metaeval import (
    CorrelationResult,
    Pascal50sTriplet,
    RatedPair,
    kendall_tau,
    load_rated_dataset,
    pascal50s_accuracy,
    t_test_significance,
)
from .scorer import (
    EngineConfig,
    EvaluationInstance,
    QaceScore,
    QuestionResult,
    score_against_image,
    score_against_reference,
    score_batch,
    score_multi_reference,
)
from .synthetic import (
    CaptionedImage,
    RoundTripMatch,
    RoundTripReport,
    SyntheticTriple,
    assemble_dataset,
    build_qa_pairs,
    round_trip_filter,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerRecord",
    "AnswerSpan",
    "CaptionedImage",
    "ChunkLexicon",
    "CorrelationResult",
    "EngineConfig",
    "EvaluationInstance",
    "Gateway",
    "HeuristicBackend",
    "MockBackend",
    "Pascal50sTriplet",
    "PosToken",
    "QaceScore",
    "QuestionResult",
    "QuestionSet",
    "RatedPair",
    "RoundTripMatch",
    "RoundTripReport",
    "SimilarityBreakdown",
    "SimilarityConfig",
    "SyntheticTriple",
    "TcpBackend",
    "answerability",
    "assemble_dataset",
    "build_backend",
    "build_qa_pairs",
    "compose",
    "dedupe_spans",
    "extract_noun_phrases",
    "extract_spans",
    "kendall_tau",
    "load_rated_dataset",
    "normalize_answer",
    "pascal50s_accuracy",
    "round_trip_filter",
    "score_against_image",
    "score_against_reference",
    "score_batch",
    "score_multi_reference",
    "split",
    "t_test_significance",
    "tag_tokens",
    "token_f1",
]
