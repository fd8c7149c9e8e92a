"""Abstractive visual QA: encoder over projected region features + question.

A single linear layer maps each 2054-d region feature to the text embedding
width (768 by default) so boxes become ordinary tokens. The encoder input is
``[36 visual tokens] [separator] [question tokens]`` truncated to 64
positions; the separator is a learned embedding row and visual tokens carry
no positional encoding (documented defaults, not required by the protocol).
A mean-pooled context vector feeds a one-layer recurrent decoder that
generates free-form answers up to 32 tokens. The probability that a question
is unanswerable is the softmax mass of the single ``unanswerable`` token at
the first decoding step.

Sized for desk-scale training (memorizing small synthetic sets); the
architecture and contracts are what matter, not checkpoint quality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FeatureShapeError
from .features import FEATURE_DIM, NUM_BOXES, VisualFeatures
from .tokenizer import Tokenizer


@dataclass(frozen=True)
class ModelConfig:
    text_embedding_dim: int = 768
    feature_dim: int = FEATURE_DIM
    num_boxes: int = NUM_BOXES
    max_input_len: int = 64  # includes the visual tokens and the separator
    max_output_len: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.max_input_len <= self.num_boxes + 1:
            raise ValueError("max_input_len leaves no room for question tokens")
        if self.max_output_len < 1:
            raise ValueError("max_output_len must be positive")


class AbstractiveVqa:
    def __init__(self, tokenizer: Tokenizer, config: ModelConfig = ModelConfig()):
        self.tokenizer = tokenizer
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.text_embedding_dim
        vocab = len(tokenizer)
        self.embeddings = rng.normal(0.0, 0.1, size=(vocab, d))
        self.w_proj = rng.normal(0.0, 1.0 / np.sqrt(config.feature_dim),
                                 size=(config.feature_dim, d))
        self.b_proj = np.zeros(d)
        # the context concatenates the visual-block and question-block means
        self.w_state = rng.normal(0.0, 1.0 / np.sqrt(2 * d), size=(2 * d, d))
        self.w_prev = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d))
        self.b_state = np.zeros(d)
        self.w_out = rng.normal(0.0, 0.1, size=(d, vocab))
        self.b_out = np.zeros(vocab)

    # -- encoding ---------------------------------------------------------------

    def project_features(self, features: VisualFeatures) -> np.ndarray:
        features.validated(self.config.num_boxes, self.config.feature_dim)
        return features.boxes.astype(np.float64) @ self.w_proj + self.b_proj

    def encode_multimodal(self, features: VisualFeatures, question_ids: list[int]) -> np.ndarray:
        """Embedded input sequence: visual tokens, separator, question tokens.

        Length is min(num_boxes + 1 + len(question_ids), max_input_len); every
        position has text_embedding_dim columns.
        """
        visual = self.project_features(features)
        separator = self.embeddings[self.tokenizer.sep_id][None, :]
        question = self.embeddings[np.asarray(question_ids, dtype=int)] if question_ids \
            else np.zeros((0, self.config.text_embedding_dim))
        sequence = np.concatenate([visual, separator, question], axis=0)
        return sequence[: self.config.max_input_len]

    def _context(self, sequence: np.ndarray) -> np.ndarray:
        """Concatenated means of the visual block and the question block.

        Plain mean pooling lets 37 visual rows drown a handful of question
        tokens; giving each block its own half of the context keeps both
        signals usable.
        """
        n_prefix = min(self.config.num_boxes + 1, len(sequence))
        prefix = sequence[:n_prefix].mean(axis=0)
        if len(sequence) > n_prefix:
            question = sequence[n_prefix:].mean(axis=0)
        else:
            question = np.zeros_like(prefix)
        return np.concatenate([prefix, question])

    # -- decoding ---------------------------------------------------------------

    def _step(self, context: np.ndarray, prev_id: int) -> tuple[np.ndarray, np.ndarray]:
        prev_emb = self.embeddings[prev_id]
        state = np.tanh(context @ self.w_state + prev_emb @ self.w_prev + self.b_state)
        logits = state @ self.w_out + self.b_out
        return state, logits

    @staticmethod
    def _softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max()
        exp = np.exp(shifted)
        return exp / exp.sum()

    def answer(self, features: VisualFeatures, question: str) -> tuple[str, float]:
        """Greedy decode plus first-step unanswerable mass."""
        question_ids = self.tokenizer.encode(question)
        sequence = self.encode_multimodal(features, question_ids)
        context = self._context(sequence)
        prev = self.tokenizer.bos_id
        decoded: list[int] = []
        p_unanswerable = 0.0
        for step in range(self.config.max_output_len):
            _, logits = self._step(context, prev)
            probs = self._softmax(logits)
            if step == 0:
                p_unanswerable = float(probs[self.tokenizer.unanswerable_id])
            prev = int(probs.argmax())
            if prev == self.tokenizer.eos_id:
                break
            decoded.append(prev)
        return self.tokenizer.decode(decoded), p_unanswerable

    # -- training ---------------------------------------------------------------

    def train(
        self,
        examples: list[tuple[VisualFeatures, str, str]],
        epochs: int = 200,
        learning_rate: float = 0.05,
        clip_norm: float = 5.0,
        stop_loss: float = 0.0,
    ) -> list[float]:
        """Teacher-forced cross-entropy over (features, question, answer) triples.

        Stops early once the mean per-step loss drops below ``stop_loss``.
        """
        prepared = []
        for features, question, answer in examples:
            question_ids = self.tokenizer.encode(question)
            target = self.tokenizer.encode(answer) + [self.tokenizer.eos_id]
            prepared.append((features, question_ids, target))
        losses = []
        for _ in range(epochs):
            losses.append(self._epoch(prepared, learning_rate, clip_norm))
            if losses[-1] < stop_loss:
                break
        return losses

    def _epoch(self, prepared, lr: float, clip_norm: float) -> float:
        total_loss = 0.0
        total_steps = 0
        for features, question_ids, target in prepared:
            boxes = features.validated(
                self.config.num_boxes, self.config.feature_dim
            ).boxes.astype(np.float64)
            visual = boxes @ self.w_proj + self.b_proj
            sep_row = self.embeddings[self.tokenizer.sep_id][None, :]
            question = (self.embeddings[np.asarray(question_ids, dtype=int)]
                        if question_ids else np.zeros((0, visual.shape[1])))
            sequence = np.concatenate([visual, sep_row, question], axis=0)
            kept = min(len(sequence), self.config.max_input_len)
            sequence = sequence[:kept]
            context = self._context(sequence)

            grads = {name: np.zeros_like(getattr(self, name)) for name in
                     ("embeddings", "w_state", "w_prev", "b_state", "w_out", "b_out")}
            d_context = np.zeros_like(context)

            prev = self.tokenizer.bos_id
            for target_id in target:
                prev_emb = self.embeddings[prev]
                z = context @ self.w_state + prev_emb @ self.w_prev + self.b_state
                state = np.tanh(z)
                logits = state @ self.w_out + self.b_out
                probs = self._softmax(logits)
                total_loss += -np.log(max(probs[target_id], 1e-12))
                total_steps += 1

                d_logits = probs.copy()
                d_logits[target_id] -= 1.0
                grads["w_out"] += np.outer(state, d_logits)
                grads["b_out"] += d_logits
                d_state = self.w_out @ d_logits
                d_z = d_state * (1.0 - state * state)
                grads["w_state"] += np.outer(context, d_z)
                grads["w_prev"] += np.outer(prev_emb, d_z)
                grads["b_state"] += d_z
                d_context += self.w_state @ d_z
                grads["embeddings"][prev] += self.w_prev @ d_z
                prev = target_id

            # context gradient, split per pooling block
            d = sequence.shape[1]
            n_prefix = min(self.config.num_boxes + 1, kept)
            n_question = kept - n_prefix
            d_prefix_row = d_context[:d] / n_prefix
            n_visual = min(len(visual), n_prefix)
            proj_grads = {}
            if n_visual:
                proj_grads["w_proj"] = np.outer(boxes[:n_visual].sum(axis=0), d_prefix_row)
                proj_grads["b_proj"] = n_visual * d_prefix_row
            if n_visual < n_prefix:  # separator row included
                grads["embeddings"][self.tokenizer.sep_id] += d_prefix_row
            if n_question:
                d_question_row = d_context[d:] / n_question
                for question_id in question_ids[:n_question]:
                    grads["embeddings"][question_id] += d_question_row

            all_grads = {**grads, **proj_grads}
            norm = np.sqrt(sum(float((g * g).sum()) for g in all_grads.values()))
            scale = lr if norm <= clip_norm else lr * clip_norm / norm
            for name, grad in all_grads.items():
                setattr(self, name, getattr(self, name) - scale * grad)
        return total_loss / max(total_steps, 1)

    # -- persistence ------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            vocab=np.array(self.tokenizer.id_to_token, dtype=object),
            config=np.array(json.dumps(self.config.__dict__)),
            embeddings=self.embeddings,
            w_proj=self.w_proj,
            b_proj=self.b_proj,
            w_state=self.w_state,
            w_prev=self.w_prev,
            b_state=self.b_state,
            w_out=self.w_out,
            b_out=self.b_out,
        )

    @classmethod
    def load(cls, path: str | Path) -> "AbstractiveVqa":
        data = np.load(path, allow_pickle=True)
        tokenizer = Tokenizer([str(t) for t in data["vocab"]])
        config = ModelConfig(**json.loads(str(data["config"])))
        model = cls(tokenizer, config)
        for name in ("embeddings", "w_proj", "b_proj", "w_state", "w_prev",
                     "b_state", "w_out", "b_out"):
            setattr(model, name, data[name])
        return model
