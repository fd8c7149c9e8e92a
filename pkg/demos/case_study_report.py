#!/usr/bin/env python3
"""Produce the explainability report: per-question tables behind each score.

Runs the CLI end to end (score -> report) against a scripted corpus, writing
demo_scores.jsonl and demo_report.md next to this script.
"""

import json
from pathlib import Path

from qace.cli import main

HERE = Path(__file__).parent

instances = [
    {"instance_id": "good", "candidate": "a dog chasing a ball",
     "references": ["a dog running after a ball in the park"],
     "image_id": "park-01", "human_score": 5},
    {"instance_id": "wrong-animal", "candidate": "a cow chasing a ball",
     "references": ["a dog running after a ball in the park"],
     "image_id": "park-01", "human_score": 2},
    {"instance_id": "no-nouns", "candidate": "running very quickly",
     "references": ["a dog running after a ball in the park"],
     "image_id": "park-01", "human_score": 1},
]
corpus = [{"image_id": "park-01",
           "captions": ["a dog running after a ball in the park"]}]

instances_path = HERE / "demo_instances.jsonl"
corpus_path = HERE / "demo_corpus.jsonl"
scores_path = HERE / "demo_scores.jsonl"
report_path = HERE / "demo_report.md"

instances_path.write_text("\n".join(json.dumps(i) for i in instances) + "\n")
corpus_path.write_text("\n".join(json.dumps(c) for c in corpus) + "\n")

code = main([
    "score",
    "--backend", f"heuristic:{corpus_path}",
    "--instances", str(instances_path),
    "--mode", "ref",
    "--out", str(scores_path),
])
assert code == 0, code

code = main([
    "report",
    "--scores", str(scores_path),
    "--instances", str(instances_path),
    "--human-range", "1:5",
    "--out", str(report_path),
])
assert code == 0, code

print(f"wrote {report_path}")
print("-" * 60)
print(report_path.read_text())
