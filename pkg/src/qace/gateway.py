"""Uniform client for the four model capabilities the engine needs.

One wire protocol covers question generation, textual QA, visual QA and
embedding similarity, so trained models and test doubles are interchangeable.
Backends:

* ``MockBackend``  - scripted responses from a JSON fixture; unmatched
  requests raise, never return a silent default.
* ``TcpBackend``   - newline-delimited JSON over a TCP stream; requests carry
  ids, responses may arrive out of order.
* ``HeuristicBackend`` - tiny deterministic rule backend (template questions,
  overlap-based QA, char-trigram similarity) so demos run without any model.

The ``Gateway`` wraps a backend with schema validation, a persistent
content-addressed response cache, per-capability call statistics and an
in-flight bound for concurrent use.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import socket
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import chunker as chunking
from .answersim import UNANSWERABLE, token_f1
from .chunker import AnswerSpan
from .errors import (
    BackendUnavailable,
    CacheError,
    NoAnswerCandidates,
    ProtocolViolation,
    ScriptedMiss,
    UnknownImage,
)

log = logging.getLogger(__name__)

CAP_QG = "generate_questions"
CAP_TQA = "answer_text"
CAP_VQA = "answer_visual"
CAP_SIM = "similarity"
CAP_SPANS = "extract_spans"

CAPABILITIES = (CAP_QG, CAP_TQA, CAP_VQA, CAP_SIM, CAP_SPANS)

CONTEXT_KINDS = ("candidate", "reference", "image")


def canonical_json(payload: dict) -> str:
    """Stable serialization used for cache keys and mock script lookup."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def cache_key(backend_id: str, capability: str, canonical_request: str) -> str:
    body = f"{backend_id}\n{capability}\n{canonical_request}".encode("utf-8")
    return hashlib.sha256(body).hexdigest()


@dataclass(frozen=True)
class AnswerRecord:
    """One backend answer plus its unanswerability probability."""

    answer_text: str
    p_unanswerable: float
    context_kind: str
    backend_id: str

    def to_json(self) -> dict:
        return {
            "answer_text": self.answer_text,
            "p_unanswerable": self.p_unanswerable,
            "context_kind": self.context_kind,
            "backend_id": self.backend_id,
        }


@dataclass(frozen=True)
class QuestionSet:
    """Questions generated for a caption, one per retained answer span."""

    caption_id: str
    questions: tuple[tuple[str, AnswerSpan], ...]

    @property
    def M(self) -> int:
        return len(self.questions)


def _error_from_wire(err: object) -> Exception:
    if not isinstance(err, dict) or "kind" not in err:
        return ProtocolViolation(f"malformed error object: {err!r}")
    kind = err.get("kind")
    message = str(err.get("message", ""))
    if kind == "unknown_image":
        return UnknownImage(message or "unknown image")
    if kind == "unavailable":
        return BackendUnavailable(message or "backend unavailable")
    return ProtocolViolation(f"backend error [{kind}]: {message}")


class Backend:
    """Raw capability transport. Subclasses return result dicts or raise."""

    backend_id: str = "backend"

    def call(self, capability: str, payload: dict) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MockBackend(Backend):
    """Scripted backend: (capability, canonical request) -> canned response.

    The script is a dict (or JSON fixture file) with a ``backend_id`` and an
    ``entries`` list of {capability, request, response} or
    {capability, request, error: {kind, message}} objects.
    """

    def __init__(self, script: dict):
        self.backend_id = script.get("backend_id", "mock")
        self._responses: dict[tuple[str, str], dict] = {}
        self._errors: dict[tuple[str, str], dict] = {}
        for entry in script.get("entries", []):
            cap = entry["capability"]
            if cap not in CAPABILITIES:
                raise ValueError(f"mock script entry with unknown capability {cap!r}")
            key = (cap, canonical_json(entry["request"]))
            if "error" in entry:
                self._errors[key] = entry["error"]
            else:
                self._responses[key] = entry["response"]
        self.call_counts: Counter[str] = Counter()
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def call(self, capability: str, payload: dict) -> dict:
        canonical = canonical_json(payload)
        with self._lock:
            self.call_counts[capability] += 1
        key = (capability, canonical)
        if key in self._errors:
            raise _error_from_wire(self._errors[key])
        try:
            return self._responses[key]
        except KeyError:
            raise ScriptedMiss(
                f"mock script has no entry for {capability} request {canonical}"
            ) from None

    def total_calls(self) -> int:
        return sum(self.call_counts.values())


class TcpBackend(Backend):
    """JSON-lines client over a TCP byte stream.

    Each request is one line ``{"id", "capability", "payload"}``; responses
    ``{"id", "result"}`` or ``{"id", "error"}`` may arrive in any order and
    are matched back to callers by id.
    """

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        self.backend_id = f"tcp:{host}:{port}"
        self._host = host
        self._port = port
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self._wfile = None
        self._send_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._pending: dict[int, _Waiter] = {}
        self._next_id = 0
        self._reader: threading.Thread | None = None
        self._closed = False

    def _connect(self) -> None:
        with self._state_lock:
            if self._sock is not None:
                return
            try:
                sock = socket.create_connection((self._host, self._port), timeout=self._timeout)
            except OSError as exc:
                raise BackendUnavailable(f"cannot connect to {self._host}:{self._port}: {exc}")
            self._sock = sock
            self._wfile = sock.makefile("wb")
            self._reader = threading.Thread(target=self._read_loop, daemon=True)
            self._reader.start()

    def _read_loop(self) -> None:
        assert self._sock is not None
        rfile = self._sock.makefile("rb")
        while True:
            try:
                line = rfile.readline()
            except OSError:
                line = b""
            if not line:
                self._fail_all(BackendUnavailable("connection closed by backend"))
                return
            try:
                message = json.loads(line.decode("utf-8"))
                msg_id = message["id"]
            except (ValueError, KeyError, UnicodeDecodeError):
                self._fail_all(ProtocolViolation(f"unparseable response line: {line[:200]!r}"))
                return
            with self._state_lock:
                waiter = self._pending.pop(msg_id, None)
            if waiter is not None:
                waiter.resolve(message)

    def _fail_all(self, exc: Exception) -> None:
        with self._state_lock:
            pending = list(self._pending.values())
            self._pending.clear()
            self._sock = None
        for waiter in pending:
            waiter.fail(exc)

    def call(self, capability: str, payload: dict) -> dict:
        if self._closed:
            raise BackendUnavailable("backend client is closed")
        self._connect()
        waiter = _Waiter()
        with self._state_lock:
            self._next_id += 1
            msg_id = self._next_id
            self._pending[msg_id] = waiter
        line = json.dumps(
            {"id": msg_id, "capability": capability, "payload": payload},
            sort_keys=True,
        )
        try:
            with self._send_lock:
                assert self._wfile is not None
                self._wfile.write(line.encode("utf-8") + b"\n")
                self._wfile.flush()
        except OSError as exc:
            with self._state_lock:
                self._pending.pop(msg_id, None)
            raise BackendUnavailable(f"send failed: {exc}")
        message = waiter.wait(self._timeout)
        if "error" in message:
            raise _error_from_wire(message["error"])
        result = message.get("result")
        if not isinstance(result, dict):
            raise ProtocolViolation(f"response for id {msg_id} has no result object")
        return result

    def close(self) -> None:
        self._closed = True
        with self._state_lock:
            sock = self._sock
            self._sock = None
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass


class _Waiter:
    def __init__(self):
        self._event = threading.Event()
        self._message: dict | None = None
        self._exc: Exception | None = None

    def resolve(self, message: dict) -> None:
        self._message = message
        self._event.set()

    def fail(self, exc: Exception) -> None:
        self._exc = exc
        self._event.set()

    def wait(self, timeout: float) -> dict:
        if not self._event.wait(timeout):
            raise BackendUnavailable(f"no response within {timeout}s")
        if self._exc is not None:
            raise self._exc
        assert self._message is not None
        return self._message


class HeuristicBackend(Backend):
    """Deterministic toy backend for demos and smoke runs.

    Questions come from a per-span template; QA picks the context noun phrase
    that best overlaps the question's content words; similarity is a cosine
    over character trigrams. Not a model, just enough structure to exercise
    the whole pipeline hermetically.
    """

    backend_id = "heuristic"

    def __init__(self, image_captions: dict[str, list[str]] | None = None):
        self._images = dict(image_captions or {})

    @classmethod
    def from_corpus_file(cls, path: str | Path) -> "HeuristicBackend":
        images: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                images[str(rec["image_id"])] = list(rec["captions"])
        return cls(images)

    def call(self, capability: str, payload: dict) -> dict:
        if capability == CAP_QG:
            questions = [
                {"question": f"What {span['head_noun']} is shown here?", "span_index": i}
                for i, span in enumerate(payload["spans"])
            ]
            return {"questions": questions}
        if capability == CAP_TQA:
            answer, p = self._answer_in_text(payload["question"], [payload["context"]])
            return {"answer": answer, "p_unanswerable": p}
        if capability == CAP_VQA:
            image_id = str(payload["image_id"])
            if image_id not in self._images:
                raise UnknownImage(f"no captions for image {image_id!r}")
            answer, p = self._answer_in_text(payload["question"], self._images[image_id])
            return {"answer": answer, "p_unanswerable": p}
        if capability == CAP_SIM:
            return {"score": self._trigram_cosine(payload["a"], payload["b"])}
        if capability == CAP_SPANS:
            spans = chunking.extract_spans(payload["caption"])
            return {"spans": [s.to_payload() for s in spans]}
        raise ProtocolViolation(f"unknown capability {capability!r}")

    def _answer_in_text(self, question: str, contexts: list[str]) -> tuple[str, float]:
        content = " ".join(
            w for w in question.split() if w.lower() not in ("what", "is", "shown", "here?")
        )
        best_text, best_score = "", 0.0
        for context in contexts:
            try:
                spans = chunking.extract_spans(context)
            except Exception:
                continue
            for span in spans:
                score = token_f1(content, span.text)
                if score > best_score:
                    best_text, best_score = span.text, score
        if best_score == 0.0:
            return UNANSWERABLE, 0.9
        return best_text, max(0.0, round(1.0 - best_score, 6))

    @staticmethod
    def _trigram_cosine(a: str, b: str) -> float:
        if a == b:
            return 1.0

        def grams(s: str) -> Counter:
            padded = f"  {s.lower()} "
            return Counter(padded[i : i + 3] for i in range(len(padded) - 2))

        ga, gb = grams(a), grams(b)
        dot = sum(ga[g] * gb[g] for g in ga.keys() & gb.keys())
        if dot == 0:
            return 0.0
        norm_a = sum(v * v for v in ga.values()) ** 0.5
        norm_b = sum(v * v for v in gb.values()) ** 0.5
        return min(1.0, dot / (norm_a * norm_b))


class CacheStore:
    """One JSON file per response, named by the request digest."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._write_failed = False
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            log.warning("cache directory unusable (%s); falling back to passthrough", exc)
            self._write_failed = True

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str, canonical_request: str) -> dict | None:
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as f:
                entry = json.load(f)
        except FileNotFoundError:
            return None
        except (OSError, ValueError) as exc:
            log.warning("unreadable cache entry %s (%s); treating as miss", path, exc)
            return None
        if entry.get("canonical_request") != canonical_request:
            raise CacheError(
                f"cache key collision for {key}: stored request differs from lookup"
            )
        return entry["response"]

    def put(self, key: str, capability: str, canonical_request: str,
            response: dict, backend_id: str) -> None:
        if self._write_failed:
            return
        entry = {
            "key": key,
            "capability": capability,
            "canonical_request": canonical_request,
            "response": response,
            "backend_id": backend_id,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        try:
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(entry, f, sort_keys=True)
            os.replace(tmp, path)
        except OSError as exc:
            self._write_failed = True
            log.warning("cache store unwritable (%s); continuing without caching", exc)

    def digest(self) -> str:
        """Content digest of the whole store, for provenance blocks."""
        h = hashlib.sha256()
        if self.directory.is_dir():
            for path in sorted(self.directory.glob("*.json")):
                h.update(path.name.encode("utf-8"))
                h.update(path.read_bytes())
        return h.hexdigest()


@dataclass
class GatewayStats:
    backend_calls: Counter = field(default_factory=Counter)
    cache_hits: int = 0

    def total_backend_calls(self) -> int:
        return sum(self.backend_calls.values())

    def to_json(self) -> dict:
        return {
            "backend_calls": dict(self.backend_calls),
            "backend_calls_total": self.total_backend_calls(),
            "cache_hits": self.cache_hits,
        }


class Gateway:
    """Typed, validated, cached access to a backend."""

    def __init__(
        self,
        backend: Backend,
        cache_dir: str | Path | None = None,
        max_inflight: int = 8,
    ):
        self.backend = backend
        self.store = CacheStore(cache_dir) if cache_dir is not None else None
        self.stats = GatewayStats()
        self._inflight = threading.BoundedSemaphore(max_inflight)
        self._stats_lock = threading.Lock()

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    def cached_call(self, capability: str, payload: dict) -> dict:
        """Forward a request, consulting and feeding the persistent cache."""
        canonical = canonical_json(payload)
        key = cache_key(self.backend.backend_id, capability, canonical)
        if self.store is not None:
            cached = self.store.get(key, canonical)
            if cached is not None:
                with self._stats_lock:
                    self.stats.cache_hits += 1
                return cached
        with self._inflight:
            response = self.backend.call(capability, payload)
        with self._stats_lock:
            self.stats.backend_calls[capability] += 1
        if self.store is not None:
            self.store.put(key, capability, canonical, response, self.backend.backend_id)
        return response

    # -- typed capability wrappers -------------------------------------------------

    def generate_questions(
        self,
        caption: str,
        spans: list[AnswerSpan],
        caption_id: str | None = None,
    ) -> QuestionSet:
        if not spans:
            raise NoAnswerCandidates("cannot generate questions without answer spans")
        payload = {"caption": caption, "spans": [s.to_payload() for s in spans]}
        result = self.cached_call(CAP_QG, payload)
        items = result.get("questions")
        if not isinstance(items, list) or len(items) != len(spans):
            raise ProtocolViolation(
                f"expected {len(spans)} questions, got {items!r}"
            )
        by_index: dict[int, str] = {}
        for item in items:
            if not isinstance(item, dict):
                raise ProtocolViolation(f"malformed question item: {item!r}")
            question = item.get("question")
            span_index = item.get("span_index")
            if not isinstance(question, str) or not question.strip():
                raise ProtocolViolation(f"empty or missing question text: {item!r}")
            if not isinstance(span_index, int) or isinstance(span_index, bool):
                raise ProtocolViolation(f"bad span_index: {item!r}")
            if span_index in by_index:
                raise ProtocolViolation(f"duplicate span_index {span_index}")
            by_index[span_index] = question
        if set(by_index) != set(range(len(spans))):
            raise ProtocolViolation(
                f"span indexes {sorted(by_index)} do not cover 0..{len(spans) - 1}"
            )
        if caption_id is None:
            caption_id = hashlib.sha256(caption.encode("utf-8")).hexdigest()[:12]
        ordered = tuple((by_index[i], span) for i, span in enumerate(spans))
        return QuestionSet(caption_id=caption_id, questions=ordered)

    def answer_text(self, question: str, context: str, kind: str = "reference") -> AnswerRecord:
        if not question.strip() or not context.strip():
            raise ValueError("question and context must be non-empty")
        if kind not in ("candidate", "reference"):
            raise ValueError(f"textual QA context kind must be candidate/reference, got {kind!r}")
        result = self.cached_call(CAP_TQA, {"question": question, "context": context})
        return self._to_answer_record(result, kind)

    def answer_visual(self, question: str, image_ref: str) -> AnswerRecord:
        if not question.strip():
            raise ValueError("question must be non-empty")
        result = self.cached_call(CAP_VQA, {"question": question, "image_id": image_ref})
        return self._to_answer_record(result, "image")

    def similarity(self, answer_a: str, answer_b: str) -> float:
        if not answer_a.strip() or not answer_b.strip():
            raise ValueError("similarity inputs must be non-empty")
        result = self.cached_call(CAP_SIM, {"a": answer_a, "b": answer_b})
        score = result.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise ProtocolViolation(f"similarity score missing or non-numeric: {result!r}")
        score = float(score)
        if score < 0.0 or score > 1.0:
            clamped = min(1.0, max(0.0, score))
            log.warning("similarity score %s outside [0,1]; clamped to %s", score, clamped)
            return clamped
        return score

    def extract_spans(self, caption: str) -> list[AnswerSpan]:
        """Backend-supplied chunking, overriding the built-in rule chunker."""
        result = self.cached_call(CAP_SPANS, {"caption": caption})
        raw = result.get("spans")
        if not isinstance(raw, list):
            raise ProtocolViolation(f"extract_spans returned no span list: {result!r}")
        spans = []
        for i, obj in enumerate(raw):
            try:
                spans.append(AnswerSpan.from_payload(obj, index=i))
            except (KeyError, TypeError, ValueError):
                raise ProtocolViolation(f"malformed span object: {obj!r}")
        return spans

    def _to_answer_record(self, result: dict, kind: str) -> AnswerRecord:
        answer = result.get("answer")
        p = result.get("p_unanswerable")
        if not isinstance(answer, str) or not answer.strip():
            raise ProtocolViolation(f"answer missing or empty: {result!r}")
        if not isinstance(p, (int, float)) or isinstance(p, bool):
            raise ProtocolViolation(f"p_unanswerable missing or non-numeric: {result!r}")
        p = float(p)
        if not (0.0 <= p <= 1.0):
            raise ProtocolViolation(f"p_unanswerable {p} outside [0,1]")
        if (answer == UNANSWERABLE) != (p > 0.5):
            log.debug(
                "answer %r and p_unanswerable %.3f disagree on answerability", answer, p
            )
        return AnswerRecord(
            answer_text=answer,
            p_unanswerable=p,
            context_kind=kind,
            backend_id=self.backend.backend_id,
        )


def build_backend(spec: str) -> Backend:
    """Construct a backend from a CLI spec string.

    ``mock:<script.json>``, ``heuristic[:<corpus.jsonl>]`` or
    ``tcp:<host>:<port>``.
    """
    if spec.startswith("mock:"):
        return MockBackend.from_file(spec[len("mock:"):])
    if spec == "heuristic":
        return HeuristicBackend()
    if spec.startswith("heuristic:"):
        return HeuristicBackend.from_corpus_file(spec[len("heuristic:"):])
    if spec.startswith("tcp:"):
        rest = spec[len("tcp:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"tcp backend spec must be tcp:<host>:<port>, got {spec!r}")
        return TcpBackend(host, int(port))
    raise ValueError(f"unknown backend spec {spec!r}")
