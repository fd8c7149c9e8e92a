#!/usr/bin/env python3
"""Build a small synthetic VQA training set from captioned images.

For every caption: extract noun phrases, generate an answer-aware question
per phrase, keep only pairs the QA model answers back correctly (round-trip
consistency), attach the image, then add 20% negative-sampled unanswerable
questions and split 9:1 by image.
"""

from qace import CaptionedImage, Gateway, HeuristicBackend
from qace.synthetic import RoundTripMatch, assemble_dataset, split

corpus = [
    CaptionedImage("img-00", ("a dog chasing a ball in the park",)),
    CaptionedImage("img-01", ("a red bus on a busy street",)),
    CaptionedImage("img-02", ("two children flying a kite on the beach",)),
    CaptionedImage("img-03", ("a plate of pasta on a wooden table",)),
    CaptionedImage("img-04", ("a cat sleeping on a warm windowsill",)),
    CaptionedImage("img-05", ("a man holding an umbrella in the rain",)),
]

gateway = Gateway(HeuristicBackend({c.image_id: list(c.captions) for c in corpus}))

triples, report = assemble_dataset(
    corpus,
    gateway,
    unanswerable_ratio=0.2,
    seed=13,
    match=RoundTripMatch.parse("f1:0.6"),  # relaxed round trip for abstractive answers
)
print(f"generated {report.generated} question/answer pairs, "
      f"kept {report.kept} after the round trip, filtered {report.filtered}")

unanswerable = [t for t in triples if t.answer == "unanswerable"]
print(f"dataset: {len(triples)} triples, {len(unanswerable)} unanswerable "
      f"({len(unanswerable) / len(triples):.0%})\n")

for triple in triples[:6]:
    tag = "NEG" if triple.answer == "unanswerable" else "POS"
    print(f"  [{tag}] {triple.image_id}: {triple.question!r} -> {triple.answer!r}")

train, validation = split(triples, train_fraction=0.9, seed=13)
train_images = {t.image_id for t in train}
val_images = {t.image_id for t in validation}
print(f"\nsplit: {len(train)} train / {len(validation)} validation triples; "
      f"image overlap: {sorted(train_images & val_images)}")
