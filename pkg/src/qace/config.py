"""Run configuration: flat key=value config files merged with CLI flags."""

from __future__ import annotations

from pathlib import Path

from .answersim import SimilarityConfig
from .chunker import ChunkLexicon
from .errors import ConfigError
from .scorer import EngineConfig

KNOWN_KEYS = {
    "backend",
    "cache_dir",
    "seed",
    "lexicon",
    "mode",
    "instances",
    "out",
    "similarity.components",
    "similarity.clamp",
    "answerability.side",
    "candidate_answer",
    "answer_form",
    "use_backend_chunker",
    "workers",
    "corpus",
    "ratio",
    "ratio_base",
    "match",
    "split",
    "human_range",
    "ties",
    "schema",
    "scores",
    "scores_b",
    "scores_c",
    "human",
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def parse_components(text: str) -> tuple[str, ...]:
    cleaned = text.strip().strip("[]")
    parts = [p.strip() for p in cleaned.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"similarity.components must name at least one component: {text!r}")
    return tuple(parts)


class Resolver:
    """Merge CLI flag values (highest), config file values, and defaults."""

    def __init__(self, flags: dict, file_values: dict[str, str]):
        self._flags = flags
        self._file = file_values
        self.resolved: dict[str, object] = {}

    def get(self, key: str, default=None, convert=None):
        flag_key = key.replace(".", "_")
        value = self._flags.get(flag_key)
        if value is None and key in self._file:
            value = self._file[key]
            if convert is not None:
                value = convert(value)
        if value is None:
            value = default
        self.resolved[key] = value
        return value


def build_engine_config(resolver: Resolver) -> EngineConfig:
    components = resolver.get(
        "similarity.components", SimilarityConfig().components, parse_components
    )
    if isinstance(components, str):
        components = parse_components(components)
    clamp = resolver.get("similarity.clamp", True, lambda v: parse_bool(v, "similarity.clamp"))
    side = resolver.get("answerability.side", "context")
    candidate_answer = resolver.get("candidate_answer", "qa")
    answer_form = resolver.get("answer_form", "span")
    use_backend_chunker = resolver.get(
        "use_backend_chunker", False, lambda v: parse_bool(v, "use_backend_chunker")
    )
    workers = int(resolver.get("workers", 1, int))
    lexicon_path = resolver.get("lexicon")
    lexicon = None
    if lexicon_path:
        try:
            lexicon = ChunkLexicon.from_file(lexicon_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load lexicon {lexicon_path}: {exc}")
    try:
        return EngineConfig(
            similarity=SimilarityConfig(
                components=tuple(components), clamp=bool(clamp), answerability_side=side
            ),
            candidate_answer=candidate_answer,
            answer_form=answer_form,
            use_backend_chunker=bool(use_backend_chunker),
            lexicon=lexicon,
            workers=workers,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
