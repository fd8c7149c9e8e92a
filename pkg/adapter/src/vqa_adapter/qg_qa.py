"""Textual capabilities: cloze question generation, extractive QA, similarity.

Stand-ins for the pretrained text-to-text checkpoints a production deployment
would load: small, deterministic, and faithful to the wire contracts.
Questions are answer-aware by construction (the answer span is cut out of the
caption and replaced with "what"), the QA model returns a context substring,
and similarity is a cosine over hashed character trigrams.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter

_WORD_RE = re.compile(r"[A-Za-z0-9']+")

DETERMINERS = {"a", "an", "the", "this", "that", "these", "those", "his", "her",
               "its", "their", "my", "your", "our", "some", "any", "each", "every", "no"}
FUNCTION_WORDS = DETERMINERS | {
    "and", "or", "but", "nor", "if", "when", "while", "because", "than", "so",
    "on", "in", "at", "of", "with", "by", "for", "from", "to", "over", "under",
    "near", "into", "onto", "behind", "between", "through", "above", "below",
    "across", "around", "down", "up", "off", "out", "past", "inside", "outside",
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
    "had", "do", "does", "did", "can", "could", "will", "would", "may", "might",
    "shall", "should", "must", "it", "he", "she", "they", "we", "you", "i",
    "there", "here", "very", "what", "who", "which", "where", "how", "not",
}


def _tokens(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def extract_spans(caption: str) -> list[dict]:
    """Flat content-word runs, optionally led by a determiner."""
    tokens = _tokens(caption)
    spans: list[dict] = []
    i = 0
    while i < len(tokens):
        word = tokens[i][0].lower()
        if word in FUNCTION_WORDS and word not in DETERMINERS:
            i += 1
            continue
        start = i
        if word in DETERMINERS:
            i += 1
        content_start = i
        while i < len(tokens) and tokens[i][0].lower() not in FUNCTION_WORDS:
            i += 1
        if i == content_start:  # determiner with no content after it
            i = start + 1
            continue
        first, last = tokens[start], tokens[i - 1]
        spans.append({
            "text": caption[first[1]: last[2]],
            "head_noun": last[0],
            "char_start": first[1],
            "char_end": last[2],
        })
    return spans


def generate_questions(caption: str, spans: list[dict]) -> list[dict]:
    """Cloze transform: the answer span is replaced by 'what'."""
    questions = []
    for index, span in enumerate(spans):
        prefix = caption[: int(span["char_start"])]
        suffix = caption[int(span["char_end"]):]
        cloze = f"{prefix}what{suffix}".strip()
        cloze = re.sub(r"\s+", " ", cloze).rstrip(".!?, ")
        questions.append({"question": cloze + "?", "span_index": index})
    return questions


def _content_words(text: str) -> list[str]:
    return [w.lower() for w in _WORD_RE.findall(text) if w.lower() not in FUNCTION_WORDS]


def _overlap_f1(a: list[str], b: list[str]) -> float:
    if not a or not b:
        return 0.0
    common = sum((Counter(a) & Counter(b)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(a), common / len(b)
    return 2 * precision * recall / (precision + recall)


def answer_text(question: str, context: str) -> dict:
    """Answer with the span whose removal leaves the question's words behind.

    An answer-aware question mentions everything around its answer but not
    the answer itself, so the best gap is the span whose complement in the
    context overlaps the question most.
    """
    question_words = _content_words(question)
    context_tokens = _tokens(context)
    best_span, best_score = None, 0.0
    for span in extract_spans(context):
        complement = [
            t[0].lower() for t in context_tokens
            if (t[2] <= int(span["char_start"]) or t[1] >= int(span["char_end"]))
            and t[0].lower() not in FUNCTION_WORDS
        ]
        score = _overlap_f1(question_words, complement)
        if score > best_score:
            best_span, best_score = span, score
    if best_span is None or best_score == 0.0:
        return {"answer": "unanswerable", "p_unanswerable": 0.9}
    return {"answer": best_span["text"],
            "p_unanswerable": round(max(0.0, 1.0 - best_score), 6)}


_EMBED_DIM = 256


def _embed(text: str) -> list[float]:
    padded = f"  {text.lower()} "
    vector = [0.0] * _EMBED_DIM
    for i in range(len(padded) - 2):
        gram = padded[i: i + 3].encode("utf-8")
        digest = hashlib.blake2b(gram, digest_size=4).digest()
        bucket = int.from_bytes(digest[:2], "little") % _EMBED_DIM
        sign = 1.0 if digest[2] % 2 else -1.0
        vector[bucket] += sign
    return vector


def similarity(a: str, b: str) -> float:
    """Cosine of hashed-trigram embeddings, clamped to [0, 1]; 1.0 on equality."""
    if a == b:
        return 1.0
    va, vb = _embed(a), _embed(b)
    dot = sum(x * y for x, y in zip(va, vb))
    norm_a = math.sqrt(sum(x * x for x in va))
    norm_b = math.sqrt(sum(y * y for y in vb))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (norm_a * norm_b)))
