"""Wire-protocol server: newline-delimited JSON over TCP.

Requests are ``{"id", "capability", "payload"}``; each gets exactly one
``{"id", "result"}`` or ``{"id", "error": {"kind", "message"}}`` line back.
Connections are handled on their own threads; access to the single model
instance is serialized with a lock.
"""

from __future__ import annotations

import json
import logging
import socket
import threading

from . import qg_qa
from .errors import AdapterError, BackendUnavailable
from .features import FeatureStore
from .model import AbstractiveVqa

log = logging.getLogger(__name__)


class AdapterService:
    """Capability dispatch shared by the TCP server and in-process tests."""

    def __init__(self, model: AbstractiveVqa | None = None,
                 features: FeatureStore | None = None):
        self.model = model
        self.features = features
        self._model_lock = threading.Lock()

    def handle(self, capability: str, payload: dict) -> dict:
        if capability == "generate_questions":
            return {"questions": qg_qa.generate_questions(payload["caption"],
                                                          payload["spans"])}
        if capability == "answer_text":
            return qg_qa.answer_text(payload["question"], payload["context"])
        if capability == "answer_visual":
            return self._answer_visual(payload["question"], str(payload["image_id"]))
        if capability == "similarity":
            return {"score": qg_qa.similarity(payload["a"], payload["b"])}
        if capability == "extract_spans":
            return {"spans": qg_qa.extract_spans(payload["caption"])}
        raise AdapterError(f"unknown capability {capability!r}")

    def _answer_visual(self, question: str, image_id: str) -> dict:
        if self.model is None:
            raise BackendUnavailable("no VQA model loaded")
        if self.features is None:
            raise BackendUnavailable("no feature store configured")
        features = self.features.load(image_id)
        with self._model_lock:
            answer, p_unanswerable = self.model.answer(features, question)
        if not answer:
            answer = "unanswerable"
            p_unanswerable = max(p_unanswerable, 0.5)
        return {"answer": answer, "p_unanswerable": p_unanswerable}


class WireServer:
    def __init__(self, service: AdapterService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            raise SystemExit(f"cannot bind {host}:{port}: {exc}")
        self._sock.listen(16)
        self.host, self.port = self._sock.getsockname()
        self._threads: list[threading.Thread] = []
        self._closing = False

    def serve_forever(self) -> None:
        log.info("serving wire protocol on %s:%d", self.host, self.port)
        while True:
            try:
                conn, peer = self._sock.accept()
            except OSError:
                return  # socket closed
            thread = threading.Thread(target=self._serve_connection,
                                      args=(conn, peer), daemon=True)
            thread.start()
            self._threads.append(thread)

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def close(self) -> None:
        self._closing = True
        try:
            self._sock.close()
        except OSError:
            pass

    def _serve_connection(self, conn: socket.socket, peer) -> None:
        with conn, conn.makefile("rwb") as stream:
            while True:
                line = stream.readline()
                if not line:
                    return
                response = self._respond(line)
                try:
                    stream.write(json.dumps(response, sort_keys=True).encode("utf-8") + b"\n")
                    stream.flush()
                except OSError:
                    return

    def _respond(self, line: bytes) -> dict:
        msg_id = None
        try:
            message = json.loads(line.decode("utf-8"))
            msg_id = message.get("id")
            capability = message["capability"]
            payload = message["payload"]
            if not isinstance(payload, dict):
                raise AdapterError("payload must be an object")
            result = self.service.handle(capability, payload)
            return {"id": msg_id, "result": result}
        except AdapterError as exc:
            return {"id": msg_id, "error": {"kind": exc.wire_kind, "message": str(exc)}}
        except (KeyError, ValueError, TypeError, UnicodeDecodeError) as exc:
            return {"id": msg_id,
                    "error": {"kind": "bad_request", "message": f"{type(exc).__name__}: {exc}"}}
        except Exception as exc:  # keep the connection alive on surprises
            log.exception("internal error serving request")
            return {"id": msg_id,
                    "error": {"kind": "unavailable", "message": f"internal error: {exc}"}}
