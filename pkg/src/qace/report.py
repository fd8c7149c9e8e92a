"""Case-study report: per-question tables rendered from stored scores.

The renderer reads score records verbatim and formats them; the only
arithmetic here is the affine rescale of human scores into [0, 1] from the
dataset's declared range.
"""

from __future__ import annotations

import json

from .errors import AlignmentError


def rescale_human(score: float, lo: float, hi: float) -> float:
    if hi <= lo:
        raise ValueError(f"human score range must be increasing, got [{lo}, {hi}]")
    return (score - lo) / (hi - lo)


def _fmt(value) -> str:
    if value is None:
        return "-"
    return f"{value:.4f}"


def _question_table(per_question: list[dict]) -> list[str]:
    lines = [
        "| # | question | candidate answer | context answer | f1 | embedding | answerability | mean |",
        "|---|----------|------------------|----------------|----|-----------|---------------|------|",
    ]
    for i, row in enumerate(per_question, start=1):
        bd = row["breakdown"]
        lines.append(
            "| {i} | {q} | {a} | {b} | {f1} | {emb} | {ans} | {mean} |".format(
                i=i,
                q=row["question"],
                a=row["answer_on_candidate"]["answer_text"],
                b=row["answer_on_context"]["answer_text"],
                f1=_fmt(bd["f1"]),
                emb=_fmt(bd["embedding"]),
                ans=_fmt(bd["answerability"]),
                mean=_fmt(bd["mean"]),
            )
        )
    return lines


def _score_line(label: str, record: dict) -> str:
    return (
        f"**{label}**: {_fmt(record['qace'])} "
        f"(f1 {_fmt(record['qace_f1'])}, "
        f"embedding {_fmt(record['qace_embedding'])}, "
        f"answerability {_fmt(record['qace_answerability'])})"
    )


def render_report(
    score_records: list[dict],
    instances: dict[str, dict],
    human_range: tuple[float, float] | None = None,
    provenance: dict | None = None,
) -> str:
    """Build the markdown report; one section per scored instance."""
    missing = [r["instance_id"] for r in score_records if r["instance_id"] not in instances]
    if missing:
        raise AlignmentError("score ids missing from the instances file", missing=missing)

    lines: list[str] = ["# Caption evaluation case studies", ""]
    if provenance is not None:
        lines += ["```json", json.dumps(provenance, indent=2, sort_keys=True), "```", ""]
    for record in score_records:
        instance = instances[record["instance_id"]]
        lines.append(f"## {record['instance_id']}")
        lines.append("")
        lines.append(f"Candidate: *{instance['candidate']}*")
        references = instance.get("references") or []
        if references:
            for ref in references:
                lines.append(f"- reference: {ref}")
        if instance.get("image_id"):
            lines.append(f"- image: `{instance['image_id']}`")
        human = instance.get("human_score")
        if human is not None and human_range is not None:
            lines.append(
                f"- human score (normalized): {_fmt(rescale_human(human, *human_range))}"
            )
        lines.append("")
        if not record.get("defined", False):
            lines.append("> no questions generated: score undefined")
            lines.append("")
            continue
        if record.get("per_question"):
            lines += _question_table(record["per_question"])
            lines.append("")
        for ref_idx, ref_record in enumerate(record.get("per_reference") or [], start=1):
            lines.append(f"### reference {ref_idx}")
            lines.append("")
            if not ref_record.get("defined", False):
                lines.append("> no questions generated: score undefined")
                lines.append("")
                continue
            lines += _question_table(ref_record["per_question"])
            lines.append("")
            lines.append(_score_line(f"score vs reference {ref_idx}", ref_record))
            lines.append("")
        mode = record.get("mode", "ref")
        label = "QACE-Img" if mode == "img" else "QACE-Ref"
        lines.append(_score_line(label, record))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
