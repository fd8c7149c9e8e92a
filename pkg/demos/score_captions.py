#!/usr/bin/env python3
"""Walk through scoring a caption against a reference and against an image.

Uses the built-in heuristic backend (template questions, overlap QA,
trigram similarity) so everything runs offline. With a trained model server
behind `tcp:<host>:<port>` the code is identical.
"""

from qace import EngineConfig, Gateway, HeuristicBackend
from qace import score_against_image, score_against_reference
from qace.chunker import extract_spans

candidate = "A man is riding a wave on top of a surfboard"
reference = "a surfer rides a big wave near the beach"

# the answer candidates QACE will ask about
spans = extract_spans(candidate)
print("answer spans:", [s.text for s in spans])
print("head nouns:  ", [s.head_noun for s in spans])

# an "image" for the heuristic backend is just its captions; a real VQA
# backend would look at region features instead
backend = HeuristicBackend({
    "surf-001": [
        "a surfer riding a large wave",
        "a man on a surfboard in the ocean",
    ]
})
gateway = Gateway(backend, cache_dir=".qace_cache")

config = EngineConfig()

print("\n--- reference mode ---")
score = score_against_reference(candidate, reference, gateway, config)
for row in score.per_question:
    print(f"  Q: {row.question}")
    print(f"     candidate answered: {row.answer_on_candidate.answer_text!r}")
    print(f"     reference answered: {row.answer_on_context.answer_text!r}")
    bd = row.breakdown
    print(f"     f1={bd.f1:.3f} embedding={bd.embedding:.3f} "
          f"answerability={bd.answerability:.3f} -> mean={bd.mean:.3f}")
print(f"QACE-Ref = {score.qace:.4f} "
      f"(f1 {score.qace_f1:.3f}, embedding {score.qace_embedding:.3f}, "
      f"answerability {score.qace_answerability:.3f})")

print("\n--- reference-less (image) mode ---")
score = score_against_image(candidate, "surf-001", gateway, config)
for row in score.per_question:
    print(f"  Q: {row.question}")
    print(f"     image answered: {row.answer_on_context.answer_text!r} "
          f"(p_unanswerable={row.answer_on_context.p_unanswerable:.2f})")
print(f"QACE-Img = {score.qace:.4f}")

# a hallucinated caption: questions about absent objects become unanswerable
print("\n--- hallucination check ---")
wrong = "a cow standing in a kitchen"
score = score_against_image(wrong, "surf-001", gateway, config)
for row in score.per_question:
    print(f"  Q: {row.question}")
    print(f"     image answered: {row.answer_on_context.answer_text!r} "
          f"(p_unanswerable={row.answer_on_context.p_unanswerable:.2f})")
print(f"QACE-Img for {wrong!r} = {score.qace:.4f}")
