from __future__ import annotations

import json
import logging
import socket
import threading

import pytest

from qace.chunker import extract_spans
from qace.errors import (
    BackendUnavailable,
    CacheError,
    NoAnswerCandidates,
    ProtocolViolation,
    ScriptedMiss,
    UnknownImage,
)
from qace.gateway import (
    CacheStore,
    Gateway,
    HeuristicBackend,
    MockBackend,
    TcpBackend,
    build_backend,
    cache_key,
    canonical_json,
)

from mockscripts import qg_entry, sim_entry, tqa_entry, vqa_entry


def make_gateway(entries, cache_dir=None, backend_id="mock-t"):
    backend = MockBackend({"backend_id": backend_id, "entries": entries})
    return Gateway(backend, cache_dir=cache_dir), backend


class TestMockBackend:
    def test_scripted_question_and_counter(self):
        spans = extract_spans("a dog on the grass")
        gw, backend = make_gateway([qg_entry("a dog on the grass", spans,
                                             ["What animal?", "What surface?"])])
        qset = gw.generate_questions("a dog on the grass", spans)
        assert [q for q, _ in qset.questions] == ["What animal?", "What surface?"]
        assert [s.text for _, s in qset.questions] == ["a dog", "the grass"]
        assert backend.call_counts["generate_questions"] == 1

    def test_unmatched_request_is_explicit_miss(self):
        gw, _ = make_gateway([])
        with pytest.raises(ScriptedMiss):
            gw.answer_text("q?", "ctx")

    def test_scripted_error_entry(self):
        entry = {
            "capability": "answer_visual",
            "request": {"question": "q?", "image_id": "img-404"},
            "error": {"kind": "unknown_image", "message": "nope"},
        }
        gw, _ = make_gateway([entry])
        with pytest.raises(UnknownImage):
            gw.answer_visual("q?", "img-404")

    def test_empty_spans_rejected_before_backend(self):
        gw, backend = make_gateway([])
        with pytest.raises(NoAnswerCandidates):
            gw.generate_questions("a dog", [])
        assert backend.total_calls() == 0

    def test_from_file(self, tmp_path):
        script = {"backend_id": "m1", "entries": [tqa_entry("q?", "c", "a", 0.25)]}
        path = tmp_path / "script.json"
        path.write_text(json.dumps(script), encoding="utf-8")
        backend = MockBackend.from_file(path)
        gw = Gateway(backend)
        rec = gw.answer_text("q?", "c")
        assert rec.answer_text == "a"
        assert rec.p_unanswerable == 0.25
        assert rec.backend_id == "m1"


class TestResponseValidation:
    def test_unanswerable_reserved_token(self):
        gw, _ = make_gateway([tqa_entry("q?", "ctx", "unanswerable", 0.9)])
        rec = gw.answer_text("q?", "ctx")
        assert rec.answer_text == "unanswerable"
        assert rec.p_unanswerable == 0.9

    def test_p_out_of_range_rejected(self):
        gw, _ = make_gateway([tqa_entry("q?", "ctx", "a dog", 1.3)])
        with pytest.raises(ProtocolViolation):
            gw.answer_text("q?", "ctx")

    def test_empty_answer_rejected(self):
        gw, _ = make_gateway([tqa_entry("q?", "ctx", "   ", 0.0)])
        with pytest.raises(ProtocolViolation):
            gw.answer_text("q?", "ctx")

    def test_question_count_mismatch_rejected(self):
        spans = extract_spans("a dog on the grass")
        entry = qg_entry("a dog on the grass", spans, ["only one?"])
        entry["response"]["questions"] = entry["response"]["questions"][:1]
        gw, _ = make_gateway([entry])
        with pytest.raises(ProtocolViolation):
            gw.generate_questions("a dog on the grass", spans)

    def test_bad_span_index_rejected(self):
        spans = extract_spans("a dog on the grass")
        entry = qg_entry("a dog on the grass", spans, ["q1?", "q2?"])
        entry["response"]["questions"][1]["span_index"] = 5
        gw, _ = make_gateway([entry])
        with pytest.raises(ProtocolViolation):
            gw.generate_questions("a dog on the grass", spans)

    def test_similarity_clamped_with_warning(self, caplog):
        gw, _ = make_gateway([sim_entry("a", "b", 1.3)])
        with caplog.at_level(logging.WARNING, logger="qace.gateway"):
            assert gw.similarity("a", "b") == 1.0
        assert any("clamped" in r.message for r in caplog.records)

    def test_similarity_in_range_untouched(self):
        gw, _ = make_gateway([sim_entry("sand", "beach", 0.7)])
        assert gw.similarity("sand", "beach") == 0.7

    def test_visual_kind_recorded(self):
        gw, _ = make_gateway([vqa_entry("q?", "img1", "dog", 0.02)])
        rec = gw.answer_visual("q?", "img1")
        assert rec.context_kind == "image"


class TestCache:
    def test_repeat_request_hits_cache(self, tmp_path):
        gw, backend = make_gateway([tqa_entry("q?", "ctx", "a", 0.1)], cache_dir=tmp_path)
        first = gw.answer_text("q?", "ctx")
        second = gw.answer_text("q?", "ctx")
        assert first == second
        assert backend.call_counts["answer_text"] == 1
        assert gw.stats.cache_hits == 1

    def test_different_context_different_entry(self, tmp_path):
        entries = [tqa_entry("q?", "c1", "a"), tqa_entry("q?", "c2", "b")]
        gw, backend = make_gateway(entries, cache_dir=tmp_path)
        gw.answer_text("q?", "c1")
        gw.answer_text("q?", "c2")
        assert backend.call_counts["answer_text"] == 2

    def test_cold_cache_stores_n_entries(self, tmp_path):
        entries = [tqa_entry(f"q{i}?", "ctx", f"a{i}") for i in range(5)]
        gw, _ = make_gateway(entries, cache_dir=tmp_path)
        for i in range(5):
            gw.answer_text(f"q{i}?", "ctx")
        assert len(list(tmp_path.glob("*.json"))) == 5

    def test_cache_persists_across_gateways(self, tmp_path):
        entries = [tqa_entry("q?", "ctx", "a", 0.1)]
        gw1, b1 = make_gateway(entries, cache_dir=tmp_path)
        gw1.answer_text("q?", "ctx")
        gw2, b2 = make_gateway(entries, cache_dir=tmp_path)
        rec = gw2.answer_text("q?", "ctx")
        assert rec.answer_text == "a"
        assert b2.total_calls() == 0

    def test_cache_on_equals_cache_off(self, tmp_path):
        entries = [tqa_entry("q?", "ctx", "a", 0.1), sim_entry("x", "y", 0.4)]
        gw_on, _ = make_gateway(entries, cache_dir=tmp_path)
        gw_off, _ = make_gateway(entries, cache_dir=None)
        on = (gw_on.answer_text("q?", "ctx"), gw_on.similarity("x", "y"))
        off = (gw_off.answer_text("q?", "ctx"), gw_off.similarity("x", "y"))
        assert on == off

    def test_collision_detected(self, tmp_path):
        gw, _ = make_gateway([tqa_entry("q?", "ctx", "a")], cache_dir=tmp_path)
        gw.answer_text("q?", "ctx")
        entry_path = next(tmp_path.glob("*.json"))
        entry = json.loads(entry_path.read_text())
        entry["canonical_request"] = '{"question":"other?"}'
        entry_path.write_text(json.dumps(entry))
        with pytest.raises(CacheError):
            gw.answer_text("q?", "ctx")

    def test_unusable_store_falls_back_to_passthrough(self, tmp_path, caplog):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with caplog.at_level(logging.WARNING, logger="qace.gateway"):
            gw, backend = make_gateway(
                [tqa_entry("q?", "ctx", "a")], cache_dir=blocker / "sub"
            )
            rec = gw.answer_text("q?", "ctx")
        assert rec.answer_text == "a"
        assert backend.call_counts["answer_text"] == 1
        assert any("passthrough" in r.message or "without caching" in r.message
                   for r in caplog.records)

    def test_key_injectivity_on_corpus(self):
        requests = [{"question": f"q{i}?", "context": f"c{j}"} for i in range(20) for j in range(20)]
        keys = {cache_key("b", "answer_text", canonical_json(r)) for r in requests}
        assert len(keys) == len(requests)

    def test_corrupt_entry_treated_as_miss(self, tmp_path, caplog):
        gw, backend = make_gateway([tqa_entry("q?", "ctx", "a")], cache_dir=tmp_path)
        gw.answer_text("q?", "ctx")
        entry_path = next(tmp_path.glob("*.json"))
        entry_path.write_text("{corrupt")
        with caplog.at_level(logging.WARNING, logger="qace.gateway"):
            rec = gw.answer_text("q?", "ctx")
        assert rec.answer_text == "a"
        assert backend.call_counts["answer_text"] == 2


class TestMockDeterminism:
    def test_bit_reproducible(self):
        entries = [
            tqa_entry("q?", "ctx", "a dog", 0.125),
            sim_entry("a dog", "a cat", 0.375),
        ]
        outputs = []
        for _ in range(2):
            gw, _ = make_gateway(entries)
            rec = gw.answer_text("q?", "ctx")
            outputs.append(json.dumps({**rec.to_json(), "sim": gw.similarity("a dog", "a cat")},
                                      sort_keys=True))
        assert outputs[0] == outputs[1]


class _StubServer:
    """Minimal JSON-lines wire server for client tests."""

    def __init__(self, handler):
        self._handler = handler
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(1)
        self.port = self._sock.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        conn, _ = self._sock.accept()
        with conn, conn.makefile("rwb") as stream:
            while True:
                line = stream.readline()
                if not line:
                    return
                request = json.loads(line)
                for response in self._handler(request):
                    stream.write(json.dumps(response).encode() + b"\n")
                    stream.flush()

    def close(self):
        self._sock.close()


class TestTcpBackend:
    def test_round_trip(self):
        def handler(request):
            assert request["capability"] == "similarity"
            yield {"id": request["id"], "result": {"score": 0.5}}

        server = _StubServer(handler)
        try:
            gw = Gateway(TcpBackend("127.0.0.1", server.port, timeout=5))
            assert gw.similarity("a", "b") == 0.5
        finally:
            gw.backend.close()
            server.close()

    def test_out_of_order_responses_matched_by_id(self):
        buffered = []

        def handler(request):
            buffered.append(request)
            if len(buffered) == 2:
                for req in reversed(buffered):
                    yield {
                        "id": req["id"],
                        "result": {"answer": req["payload"]["question"], "p_unanswerable": 0.0},
                    }

        server = _StubServer(handler)
        backend = TcpBackend("127.0.0.1", server.port, timeout=5)
        gw = Gateway(backend)
        try:
            results = {}
            threads = [
                threading.Thread(
                    target=lambda q=q: results.update({q: gw.answer_text(q, "ctx")})
                )
                for q in ("q1?", "q2?")
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join(timeout=10)
            assert results["q1?"].answer_text == "q1?"
            assert results["q2?"].answer_text == "q2?"
        finally:
            backend.close()
            server.close()

    def test_wire_error_mapped(self):
        def handler(request):
            yield {"id": request["id"], "error": {"kind": "unknown_image", "message": "x"}}

        server = _StubServer(handler)
        backend = TcpBackend("127.0.0.1", server.port, timeout=5)
        try:
            with pytest.raises(UnknownImage):
                Gateway(backend).answer_visual("q?", "imgX")
        finally:
            backend.close()
            server.close()

    def test_unreachable_backend(self):
        backend = TcpBackend("127.0.0.1", 1, timeout=0.2)
        with pytest.raises(BackendUnavailable):
            Gateway(backend).similarity("a", "b")


class TestHeuristicBackend:
    def test_self_similarity_is_exactly_one(self):
        gw = Gateway(HeuristicBackend())
        assert gw.similarity("dog", "dog") == 1.0

    def test_answers_from_context_nouns(self):
        gw = Gateway(HeuristicBackend())
        spans = extract_spans("a dog on the grass")
        qset = gw.generate_questions("a dog on the grass", spans)
        rec = gw.answer_text(qset.questions[0][0], "a brown dog runs")
        assert "dog" in rec.answer_text

    def test_unknown_image(self):
        gw = Gateway(HeuristicBackend({"img1": ["a dog"]}))
        with pytest.raises(UnknownImage):
            gw.answer_visual("What dog is shown here?", "img2")

    def test_visual_answers_from_image_captions(self):
        gw = Gateway(HeuristicBackend({"img1": ["a spotted dog on grass"]}))
        rec = gw.answer_visual("What dog is shown here?", "img1")
        assert "dog" in rec.answer_text
        assert rec.p_unanswerable < 0.5

    def test_mismatched_question_unanswerable(self):
        gw = Gateway(HeuristicBackend({"img1": ["a red bus"]}))
        rec = gw.answer_visual("What zebra is shown here?", "img1")
        assert rec.answer_text == "unanswerable"
        assert rec.p_unanswerable > 0.5


class TestBuildBackend:
    def test_specs(self, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps({"backend_id": "m", "entries": []}))
        assert isinstance(build_backend(f"mock:{script}"), MockBackend)
        assert isinstance(build_backend("heuristic"), HeuristicBackend)
        assert isinstance(build_backend("tcp:localhost:9999"), TcpBackend)
        with pytest.raises(ValueError):
            build_backend("grpc:foo")
        with pytest.raises(ValueError):
            build_backend("tcp:nohost")
