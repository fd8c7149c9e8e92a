"""Adapter command line: train the toy VQA model, serve the wire protocol."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .features import FeatureStore, random_features
from .model import AbstractiveVqa, ModelConfig
from .server import AdapterService, WireServer
from .tokenizer import Tokenizer


def _load_triples(path: str | Path) -> list[dict]:
    triples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                triples.append(json.loads(line))
    return triples


def cmd_train(args: argparse.Namespace) -> int:
    triples = _load_triples(args.triples)
    store = FeatureStore(args.features)
    tokenizer = Tokenizer.build(
        [t["question"] for t in triples] + [t["answer"] for t in triples]
    )
    config = ModelConfig(text_embedding_dim=args.dim, seed=args.seed)
    model = AbstractiveVqa(tokenizer, config)
    examples = [
        (store.load(str(t["image_id"])), t["question"], t["answer"]) for t in triples
    ]
    losses = model.train(examples, epochs=args.epochs, learning_rate=args.lr,
                         stop_loss=args.stop_loss)
    model.save(args.out)
    print(json.dumps({"examples": len(examples), "epochs": args.epochs,
                      "final_loss": losses[-1]}))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    model = None
    if args.weights:
        try:
            model = AbstractiveVqa.load(args.weights)
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: cannot load weights {args.weights}: {exc}", file=sys.stderr)
            return 1
    features = FeatureStore(args.features) if args.features else None
    server = WireServer(AdapterService(model, features), host=args.host, port=args.port)
    print(json.dumps({"serving": f"{server.host}:{server.port}"}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.close()
    return 0


def cmd_fake_features(args: argparse.Namespace) -> int:
    """Synthesize random .vfea files for images listed in a triples/corpus file."""
    store = FeatureStore(args.out)
    image_ids: dict[str, None] = {}
    for record in _load_triples(args.source):
        image_ids.setdefault(str(record["image_id"]), None)
    for i, image_id in enumerate(image_ids):
        store.save(random_features(image_id, seed=args.seed + i))
    print(json.dumps({"images": len(image_ids), "directory": str(store.directory)}))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="vqa-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit the toy VQA model on synthetic triples")
    p_train.add_argument("--triples", required=True, help="JSON-lines {question, answer, image_id}")
    p_train.add_argument("--features", required=True, help="directory of <image_id>.vfea files")
    p_train.add_argument("--out", required=True, help="output weights file (.npz)")
    p_train.add_argument("--epochs", type=int, default=300)
    p_train.add_argument("--lr", type=float, default=0.05)
    p_train.add_argument("--stop-loss", dest="stop_loss", type=float, default=0.0,
                         help="stop early when mean per-step loss falls below this")
    p_train.add_argument("--dim", type=int, default=768, help="text embedding width")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_serve = sub.add_parser("serve", help="serve all wire capabilities over TCP")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=7455)
    p_serve.add_argument("--weights", help="trained VQA weights (.npz); omit to serve text-only")
    p_serve.add_argument("--features", help="directory of <image_id>.vfea files")
    p_serve.set_defaults(func=cmd_serve)

    p_fake = sub.add_parser("fake-features",
                            help="write random .vfea files for every image in a file")
    p_fake.add_argument("--source", required=True,
                        help="JSON-lines with image_id fields (triples or corpus)")
    p_fake.add_argument("--out", required=True, help="feature directory")
    p_fake.add_argument("--seed", type=int, default=0)
    p_fake.set_defaults(func=cmd_fake_features)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
