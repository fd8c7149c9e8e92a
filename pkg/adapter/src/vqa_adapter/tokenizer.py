"""Word-level tokenizer with the special ids the VQA model relies on."""

from __future__ import annotations

import re

PAD, BOS, EOS, SEP, UNK = "<pad>", "<s>", "</s>", "<sep>", "<unk>"
UNANSWERABLE = "unanswerable"
SPECIALS = (PAD, BOS, EOS, SEP, UNK, UNANSWERABLE)

_WORD_RE = re.compile(r"[a-z0-9']+")


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class Tokenizer:
    """Fixed vocabulary built once from training text.

    ``unanswerable`` is always a single token, so its probability mass is one
    softmax entry rather than a multi-token product.
    """

    def __init__(self, vocab: list[str]):
        self.id_to_token = list(vocab)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        for special in SPECIALS:
            if special not in self.token_to_id:
                raise ValueError(f"vocabulary is missing special token {special!r}")
        self.pad_id = self.token_to_id[PAD]
        self.bos_id = self.token_to_id[BOS]
        self.eos_id = self.token_to_id[EOS]
        self.sep_id = self.token_to_id[SEP]
        self.unk_id = self.token_to_id[UNK]
        self.unanswerable_id = self.token_to_id[UNANSWERABLE]

    @classmethod
    def build(cls, texts: list[str]) -> "Tokenizer":
        seen: dict[str, None] = {}
        for text in texts:
            for word in words(text):
                seen.setdefault(word, None)
        vocab = list(SPECIALS) + [w for w in sorted(seen) if w not in SPECIALS]
        return cls(vocab)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, text: str) -> list[int]:
        return [self.token_to_id.get(w, self.unk_id) for w in words(text)]

    def decode(self, ids: list[int]) -> str:
        keep = []
        for token_id in ids:
            token = self.id_to_token[token_id]
            if token in (PAD, BOS, EOS, SEP):
                continue
            keep.append(token)
        return " ".join(keep)
