"""Command-line entry points: score, meta-eval, build-synthetic, report."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import metaeval, synthetic
from .config import Resolver, build_engine_config, parse_config_file
from .errors import (
    AlignmentError,
    ConfigError,
    NegativeSamplingImpossible,
    QaceError,
    SchemaViolation,
)
from .gateway import Gateway, build_backend
from .report import render_report
from .scorer import EvaluationInstance, score_batch


def load_instances(path: str | Path) -> list[EvaluationInstance]:
    instances: list[EvaluationInstance] = []
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read instances file {path}: {exc}")
    with f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                instances.append(EvaluationInstance.from_json(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaViolation(f"bad instance record ({exc})", line=lineno)
    return instances


def _global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="mock:<script.json>, heuristic[:<corpus>] or tcp:<host>:<port>")
    parser.add_argument("--cache-dir", help="directory for the persistent response cache")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="seed for stochastic steps (default 0)")
    parser.add_argument("--lexicon", help="override the shipped chunker lexicon")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score candidate captions")
    _global_flags(p_score)
    p_score.add_argument("--instances", help="JSON-lines evaluation instances")
    p_score.add_argument("--mode", choices=("ref", "img"))
    p_score.add_argument("--out", help="output score file (JSON-lines)")
    p_score.add_argument("--components", dest="similarity_components",
                         help="comma list from f1,embedding,answerability")
    p_score.add_argument("--answer-form", dest="answer_form", choices=("span", "head"))
    p_score.add_argument("--candidate-answer", dest="candidate_answer", choices=("qa", "span"))
    p_score.add_argument("--answerability-side", dest="answerability_side",
                         choices=("context", "candidate", "min", "mean"))
    p_score.add_argument("--workers", type=int)
    p_score.set_defaults(func=cmd_score)

    p_meta = sub.add_parser("meta-eval", help="correlate metric scores with human judgments")
    _global_flags(p_meta)
    p_meta.add_argument("--human", help="benchmark file with human judgments")
    p_meta.add_argument("--schema", choices=("generic", "composite", "flickr8k", "pascal50s"))
    p_meta.add_argument("--scores", help="metric score file (instance_id -> score)")
    p_meta.add_argument("--scores-b", dest="scores_b", help="pascal50s: scores for candidate B")
    p_meta.add_argument("--scores-c", dest="scores_c", help="pascal50s: scores for candidate C")
    p_meta.add_argument("--ties", choices=("incorrect", "half"))
    p_meta.add_argument("--out", help="output JSON file (default: stdout)")
    p_meta.set_defaults(func=cmd_meta_eval)

    p_build = sub.add_parser("build-synthetic", help="build synthetic VQA training data")
    _global_flags(p_build)
    p_build.add_argument("--corpus", help="JSON-lines corpus of captioned images")
    p_build.add_argument("--out", help="output directory")
    p_build.add_argument("--ratio", type=float, help="unanswerable fraction (default 0.2)")
    p_build.add_argument("--ratio-base", dest="ratio_base", choices=("final", "answerable"))
    p_build.add_argument("--match", help="round-trip rule: exact or f1:<threshold>")
    p_build.add_argument("--split", dest="split_fraction", type=float,
                         help="train fraction (default 0.9)")
    p_build.set_defaults(func=cmd_build_synthetic)

    p_report = sub.add_parser("report", help="render a case-study report from scores")
    _global_flags(p_report)
    p_report.add_argument("--scores", help="score file from `qace score`")
    p_report.add_argument("--instances", help="the instances file those scores came from")
    p_report.add_argument("--out", help="output markdown file (default: stdout)")
    p_report.add_argument("--human-range", dest="human_range",
                          help="declared human score range lo:hi, e.g. 1:5")
    p_report.set_defaults(func=cmd_report)
    return parser


def _resolver(args: argparse.Namespace) -> Resolver:
    file_values = parse_config_file(args.config) if args.config else {}
    return Resolver(vars(args), file_values)


def _require(resolver: Resolver, key: str, convert=None):
    value = resolver.get(key, convert=convert)
    if value is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return value


def _make_gateway(resolver: Resolver) -> Gateway:
    spec = _require(resolver, "backend")
    try:
        backend = build_backend(str(spec))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build backend {spec!r}: {exc}")
    cache_dir = resolver.get("cache_dir")
    return Gateway(backend, cache_dir=cache_dir)


def _provenance(resolver: Resolver, gateway: Gateway | None, timestamp: bool = True) -> dict:
    block: dict = {"config": dict(sorted(resolver.resolved.items(), key=lambda kv: kv[0]))}
    if gateway is not None:
        block["backend_id"] = gateway.backend_id
        if gateway.store is not None:
            block["cache_digest"] = gateway.store.digest()
    if timestamp:
        block["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return block


def cmd_score(args: argparse.Namespace) -> int:
    resolver = _resolver(args)
    engine_config = build_engine_config(resolver)
    mode = _require(resolver, "mode")
    if mode not in ("ref", "img"):
        raise ConfigError(f"mode must be ref or img, got {mode!r}")
    instances_path = _require(resolver, "instances")
    out_path = _require(resolver, "out")
    gateway = _make_gateway(resolver)
    instances = load_instances(instances_path)

    batch = score_batch(instances, mode, gateway, engine_config)

    lines = [json.dumps({"_provenance": _provenance(resolver, gateway)}, sort_keys=True)]
    for instance in instances:
        score = batch.scores.get(instance.instance_id)
        if score is None:
            continue
        record = {"instance_id": instance.instance_id, "mode": mode, **score.to_json()}
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = batch.summary()
    summary["gateway"] = gateway.stats.to_json()
    print(json.dumps(summary, sort_keys=True))
    return 0 if not batch.failures else 1


def cmd_meta_eval(args: argparse.Namespace) -> int:
    resolver = _resolver(args)
    schema = _require(resolver, "schema")
    human_path = _require(resolver, "human")
    out_path = resolver.get("out")

    if schema == "pascal50s":
        triplets = metaeval.load_pascal50s(human_path)
        scores_b = metaeval.load_score_file(_require(resolver, "scores_b"))
        scores_c = metaeval.load_score_file(_require(resolver, "scores_c"))
        ties = resolver.get("ties", "incorrect")
        result = metaeval.pascal50s_accuracy(triplets, scores_b, scores_c, ties=ties)
    else:
        scores_path = resolver.get("scores")
        metric_scores = metaeval.load_score_file(scores_path) if scores_path else None
        pairs = metaeval.load_rated_dataset(human_path, schema, metric_scores)
        result = metaeval.with_significance(
            metaeval.kendall_tau(
                [p.metric_score for p in pairs], [p.human_score for p in pairs]
            )
        )

    payload = {
        **result.to_json(),
        "dataset": str(human_path),
        "schema": schema,
        "_provenance": _provenance(resolver, None),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_build_synthetic(args: argparse.Namespace) -> int:
    resolver = _resolver(args)
    engine_config = build_engine_config(resolver)
    corpus_path = _require(resolver, "corpus")
    out_dir = Path(_require(resolver, "out"))
    ratio = float(resolver.get("ratio", 0.2, float))
    ratio_base = resolver.get("ratio_base", "final")
    match = synthetic.RoundTripMatch.parse(str(resolver.get("match", "exact")))
    train_fraction = args.split_fraction
    if train_fraction is None:
        train_fraction = float(resolver.get("split", 0.9, float))
    resolver.resolved["split"] = train_fraction
    seed = int(resolver.get("seed", 0, int))
    gateway = _make_gateway(resolver)

    corpus = synthetic.load_corpus(corpus_path)
    triples, report = synthetic.assemble_dataset(
        corpus, gateway, unanswerable_ratio=ratio, seed=seed,
        match=match, ratio_base=ratio_base, config=engine_config,
    )
    train, validation = synthetic.split(triples, train_fraction=train_fraction, seed=seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    synthetic.write_jsonl(out_dir / "triples.jsonl", triples)
    synthetic.write_jsonl(out_dir / "train.jsonl", train)
    synthetic.write_jsonl(out_dir / "validation.jsonl", validation)
    report_doc = {
        **report.to_json(),
        "_provenance": _provenance(resolver, gateway, timestamp=False),
    }
    (out_dir / "report.json").write_text(
        json.dumps(report_doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    unanswerable = sum(1 for t in triples if t.answer == synthetic.UNANSWERABLE)
    print(json.dumps({
        "triples": len(triples),
        "answerable": len(triples) - unanswerable,
        "unanswerable": unanswerable,
        "train": len(train),
        "validation": len(validation),
        "round_trip": {"generated": report.generated, "kept": report.kept,
                       "filtered": report.filtered},
    }, sort_keys=True))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    resolver = _resolver(args)
    scores_path = _require(resolver, "scores")
    instances_path = _require(resolver, "instances")
    out_path = resolver.get("out")
    range_text = resolver.get("human_range")
    human_range = None
    if range_text:
        try:
            lo, _, hi = str(range_text).partition(":")
            human_range = (float(lo), float(hi))
        except ValueError:
            raise ConfigError(f"human_range must be lo:hi, got {range_text!r}")

    provenance = None
    records: list[dict] = []
    try:
        f = open(scores_path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read score file {scores_path}: {exc}")
    with f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise SchemaViolation(f"invalid JSON ({exc})", line=lineno)
            if "_provenance" in obj:
                provenance = obj["_provenance"]
                continue
            records.append(obj)
    instances = {i.instance_id: i.to_json() for i in load_instances(instances_path)}

    text = render_report(records, instances, human_range=human_range, provenance=provenance)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaViolation, NegativeSamplingImpossible, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
