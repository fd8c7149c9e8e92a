"""Rule-based noun phrase extraction over a deterministic coarse tagger.

Answer candidates are flat base noun phrases matching DET? (ADJ|NOUN)* NOUN,
found left to right without overlap. Tagging uses a closed-class lexicon
(shipped as ``data/lexicon.tsv``), a few suffix heuristics, and a NOUN
fallback for unknown words, so span extraction needs no external model and
is reproducible bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyCaption

TAGS = frozenset({"DET", "ADJ", "NOUN", "VERB", "ADP", "PRON", "ADV", "NUM", "OTHER"})

# Word tokens are runs of letters/digits, optionally joined by internal
# apostrophes or hyphens; any other non-space run is one OTHER token.
# Every non-whitespace character of the caption lands in exactly one token.
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*|_+|[^\w\s]+")
_WORD_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*\Z")
_NUMERIC_RE = re.compile(r"\d+(?:[.,]\d+)*\Z")


@dataclass(frozen=True)
class PosToken:
    surface: str
    tag: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class AnswerSpan:
    """A candidate answer: a contiguous noun phrase of the caption."""

    text: str
    head_noun: str
    char_start: int
    char_end: int
    index: int

    def to_payload(self) -> dict:
        """Wire representation used by question-generation requests."""
        return {
            "text": self.text,
            "head_noun": self.head_noun,
            "char_start": self.char_start,
            "char_end": self.char_end,
        }

    @classmethod
    def from_payload(cls, obj: dict, index: int) -> "AnswerSpan":
        return cls(
            text=obj["text"],
            head_noun=obj["head_noun"],
            char_start=int(obj["char_start"]),
            char_end=int(obj["char_end"]),
            index=index,
        )


class ChunkLexicon:
    """Immutable word -> tag table plus the verb stem set for suffix rules."""

    def __init__(self, table: dict[str, str]):
        for word, tag in table.items():
            if tag not in TAGS:
                raise ValueError(f"unknown tag {tag!r} for lexicon word {word!r}")
        self._table = dict(table)
        self._verbs = frozenset(w for w, t in table.items() if t == "VERB")

    def lookup(self, word: str) -> str | None:
        return self._table.get(word)

    def is_verb_stem(self, stem: str) -> bool:
        return stem in self._verbs

    def __len__(self) -> int:
        return len(self._table)

    @classmethod
    def from_file(cls, path: str | Path) -> "ChunkLexicon":
        table: dict[str, str] = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                word, tag = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>TAG', got {line!r}")
            table[word] = tag
        return cls(table)


_DEFAULT_LEXICON: ChunkLexicon | None = None


def default_lexicon() -> ChunkLexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        ref = resources.files("qace").joinpath("data/lexicon.tsv")
        with resources.as_file(ref) as path:
            _DEFAULT_LEXICON = ChunkLexicon.from_file(path)
    return _DEFAULT_LEXICON


def _tag_word(word: str, lexicon: ChunkLexicon) -> str:
    folded = word.casefold()
    tag = lexicon.lookup(folded)
    if tag is not None:
        return tag
    if _NUMERIC_RE.fullmatch(folded):
        return "NUM"
    if folded.endswith("ly") and len(folded) > 3:
        return "ADV"
    if _verb_by_suffix(folded, lexicon):
        return "VERB"
    return "NOUN"


def _verb_by_suffix(word: str, lexicon: ChunkLexicon) -> bool:
    candidates: list[str] = []
    if word.endswith("ies") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    if word.endswith("es"):
        candidates.append(word[:-2])
    if word.endswith("s"):
        candidates.append(word[:-1])
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) > len(suffix) + 1:
            stem = word[: -len(suffix)]
            candidates.append(stem)
            candidates.append(stem + "e")
            if len(stem) >= 3 and stem[-1] == stem[-2]:
                candidates.append(stem[:-1])
    return any(lexicon.is_verb_stem(c) for c in candidates)


def tag_tokens(caption: str, lexicon: ChunkLexicon | None = None) -> list[PosToken]:
    """Tokenize and coarse-tag a caption.

    Tokens partition every non-whitespace character, offsets strictly
    increase, and each surface equals the caption slice at its offsets.
    """
    if not caption or not caption.strip():
        raise EmptyCaption("caption is empty or whitespace-only")
    lexicon = lexicon or default_lexicon()
    tokens: list[PosToken] = []
    for match in _TOKEN_RE.finditer(caption):
        surface = match.group(0)
        if _WORD_RE.fullmatch(surface):
            tag = _tag_word(surface, lexicon)
        else:
            tag = "OTHER"
        tokens.append(PosToken(surface, tag, match.start(), match.end()))
    return tokens


def extract_noun_phrases(tokens: list[PosToken], caption: str | None = None) -> list[AnswerSpan]:
    """Maximal left-to-right DET? (ADJ|NOUN)* NOUN matches, non-overlapping.

    The head noun is the final NOUN token of each span. When ``caption`` is
    given, span text is the exact caption slice (preserving inner whitespace);
    otherwise surfaces are joined with single spaces.
    """
    spans: list[AnswerSpan] = []
    i = 0
    n = len(tokens)
    while i < n:
        j = i
        if tokens[j].tag == "DET":
            j += 1
        k = j
        last_noun = -1
        while k < n and tokens[k].tag in ("ADJ", "NOUN"):
            if tokens[k].tag == "NOUN":
                last_noun = k
            k += 1
        if last_noun < 0:
            i += 1
            continue
        start_tok = tokens[i]
        end_tok = tokens[last_noun]
        if caption is not None:
            text = caption[start_tok.char_start : end_tok.char_end]
        else:
            text = " ".join(t.surface for t in tokens[i : last_noun + 1])
        spans.append(
            AnswerSpan(
                text=text,
                head_noun=end_tok.surface,
                char_start=start_tok.char_start,
                char_end=end_tok.char_end,
                index=len(spans),
            )
        )
        i = last_noun + 1
    return spans


def to_head_form(spans: list[AnswerSpan], tokens: list[PosToken]) -> list[AnswerSpan]:
    """Shrink each span to its head noun token (for --answer-form head)."""
    out: list[AnswerSpan] = []
    for span in spans:
        head = None
        for tok in tokens:
            if (
                tok.char_start >= span.char_start
                and tok.char_end <= span.char_end
                and tok.tag == "NOUN"
            ):
                head = tok
        if head is None:  # cannot happen for chunker output; keep span as-is
            out.append(span)
            continue
        out.append(
            AnswerSpan(
                text=head.surface,
                head_noun=head.surface,
                char_start=head.char_start,
                char_end=head.char_end,
                index=len(out),
            )
        )
    return out


def dedupe_spans(spans: list[AnswerSpan]) -> list[AnswerSpan]:
    """Drop spans whose case-folded text repeats an earlier span; reindex."""
    seen: set[str] = set()
    out: list[AnswerSpan] = []
    for span in spans:
        key = span.text.casefold()
        if key in seen:
            continue
        seen.add(key)
        out.append(
            AnswerSpan(
                text=span.text,
                head_noun=span.head_noun,
                char_start=span.char_start,
                char_end=span.char_end,
                index=len(out),
            )
        )
    return out


def extract_spans(
    caption: str,
    answer_form: str = "span",
    lexicon: ChunkLexicon | None = None,
) -> list[AnswerSpan]:
    """Full pipeline: tag, chunk, optional head shrink, dedupe."""
    tokens = tag_tokens(caption, lexicon)
    spans = extract_noun_phrases(tokens, caption)
    if answer_form == "head":
        spans = to_head_form(spans, tokens)
    elif answer_form != "span":
        raise ValueError(f"answer_form must be 'span' or 'head', got {answer_form!r}")
    return dedupe_spans(spans)
