from __future__ import annotations

import sys
from pathlib import Path

import pytest

from vqa_adapter.features import random_features
from vqa_adapter.model import AbstractiveVqa, ModelConfig
from vqa_adapter.tokenizer import Tokenizer

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

REPO_ROOT = Path(__file__).resolve().parents[2]
GOLDEN_WIRE = REPO_ROOT / "golden" / "wire"


@pytest.fixture(scope="session")
def golden_wire() -> Path:
    assert GOLDEN_WIRE.is_dir(), f"shared goldens missing: {GOLDEN_WIRE}"
    return GOLDEN_WIRE


def ten_triple_fixture():
    """8 answerable + 2 negative-sampled unanswerable training triples."""
    images = {name: random_features(name, seed=100 + k)
              for k, name in enumerate(["imgA", "imgB", "imgC", "imgD"])}
    answerable = [
        ("imgA", "what in the park?", "a dog"),
        ("imgA", "a dog in what?", "the park"),
        ("imgB", "what on the table?", "a red ball"),
        ("imgB", "a red ball on what?", "the table"),
        ("imgC", "what near the window?", "a cat"),
        ("imgC", "a cat near what?", "the window"),
        ("imgD", "what under the tree?", "a bench"),
        ("imgD", "a bench under what?", "the tree"),
    ]
    negatives = [
        ("imgB", "what in the park?", "unanswerable"),   # imgA's question
        ("imgA", "what on the table?", "unanswerable"),  # imgB's question
    ]
    return images, answerable, negatives


@pytest.fixture(scope="session")
def trained():
    """Toy model fit on the 10-triple fixture until it memorizes."""
    images, answerable, negatives = ten_triple_fixture()
    triples = answerable + negatives
    tokenizer = Tokenizer.build([q for _, q, _ in triples] + [a for _, _, a in triples])
    model = AbstractiveVqa(tokenizer, ModelConfig(text_embedding_dim=64, seed=11))
    examples = [(images[img], q, a) for img, q, a in triples]
    losses = model.train(examples, epochs=600, learning_rate=0.05, stop_loss=0.02)
    return images, triples, model, losses
