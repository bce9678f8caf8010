"""Backend tests: scripted determinism, remote retry behavior against a local
stub server, and record/replay."""

from __future__ import annotations

import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from clariflow.backend import (
    BackendRegistry,
    ChatRequest,
    EndpointError,
    RecordingBackend,
    RemoteBackend,
    RemoteBinding,
    ReplayBackend,
    ReplayMiss,
    Script,
    ScriptEntry,
    ScriptedBackend,
    ScriptedBinding,
    ScriptExhausted,
    Timeout,
    load_backend_config,
    record_and_replay,
)


def _request(text: str = "hello") -> ChatRequest:
    return ChatRequest(system_prompt="sys", turns=(("user", text),))


# --- scripted ---

def test_single_wildcard_entry():
    backend = ScriptedBackend(Script.of("<domain>hotel</domain>"))
    assert backend.complete(_request()) == "<domain>hotel</domain>"


def test_exhaustion_fail():
    backend = ScriptedBackend(Script.of("a", "b", exhaustion="fail"))
    assert backend.complete(_request()) == "a"
    assert backend.complete(_request()) == "b"
    with pytest.raises(ScriptExhausted):
        backend.complete(_request())


def test_exhaustion_repeat_last():
    backend = ScriptedBackend(Script.of("a", "b", exhaustion="repeat_last"))
    backend.complete(_request())
    backend.complete(_request())
    assert backend.complete(_request()) == "b"
    assert backend.complete(_request()) == "b"


def test_matcher_substring_and_callable():
    script = Script(
        (
            ScriptEntry("matched-text", match="needle"),
            ScriptEntry("matched-callable", match=lambda r: r.tag == "judge"),
        )
    )
    backend = ScriptedBackend(script)
    assert backend.complete(_request("has a needle inside")) == "matched-text"
    assert backend.complete(ChatRequest("", (("user", "x"),), tag="judge")) == "matched-callable"


def test_scripted_is_pure_function_of_history():
    script = Script.of("one", "two", "three")
    a = ScriptedBackend(script)
    b = ScriptedBackend(script)
    requests = [_request(t) for t in ("x", "y", "z")]
    assert [a.complete(r) for r in requests] == [b.complete(r) for r in requests]


def test_script_must_be_nonempty():
    with pytest.raises(ValueError):
        Script(())


# --- remote, against a local stub ---

class _StubHandler(BaseHTTPRequestHandler):
    behavior: list[tuple[int, str]] = []  # (status, reply text) consumed per request
    seen: list[dict] = []

    def do_POST(self):  # noqa: N802
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append(body)
        status, text = type(self).behavior.pop(0) if type(self).behavior else (200, "ok")
        payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]})
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload.encode())

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    _StubHandler.behavior = []
    _StubHandler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", _StubHandler
    server.shutdown()


def test_remote_success(stub_server):
    url, handler = stub_server
    handler.behavior = [(200, "<domain>train</domain>")]
    backend = RemoteBackend(RemoteBinding(endpoint=url, model="m", backoff_base=0.0))
    assert backend.complete(_request("route me")) == "<domain>train</domain>"
    assert handler.seen[0]["model"] == "m"
    assert handler.seen[0]["messages"][0] == {"role": "system", "content": "sys"}


def test_remote_retries_on_5xx_then_succeeds(stub_server):
    url, handler = stub_server
    handler.behavior = [(500, "boom"), (200, "fine")]
    backend = RemoteBackend(RemoteBinding(endpoint=url, model="m", retry_budget=3, backoff_base=0.0))
    assert backend.complete(_request()) == "fine"
    assert len(handler.seen) == 2


def test_remote_5xx_exhausts_budget(stub_server):
    url, handler = stub_server
    handler.behavior = [(500, "a"), (503, "b")]
    backend = RemoteBackend(RemoteBinding(endpoint=url, model="m", retry_budget=2, backoff_base=0.0))
    with pytest.raises(EndpointError):
        backend.complete(_request())
    assert len(handler.seen) == 2


def test_remote_4xx_fails_fast(stub_server):
    url, handler = stub_server
    handler.behavior = [(401, "no")]
    backend = RemoteBackend(RemoteBinding(endpoint=url, model="m", retry_budget=3, backoff_base=0.0))
    with pytest.raises(EndpointError) as excinfo:
        backend.complete(_request())
    assert excinfo.value.status == 401
    assert len(handler.seen) == 1


def test_remote_unreachable_times_out_after_budget():
    # grab a port and close it so connections are refused
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    binding = RemoteBinding(
        endpoint=f"http://127.0.0.1:{port}/v1", model="m", timeout=0.2, retry_budget=2, backoff_base=0.0
    )
    with pytest.raises(Timeout):
        RemoteBackend(binding).complete(_request())


def test_remote_binding_validation():
    with pytest.raises(ValueError):
        RemoteBinding(endpoint="http://x", model="m", timeout=0)
    with pytest.raises(ValueError):
        RemoteBinding(endpoint="http://x", model="m", retry_budget=0)


# --- record / replay ---

def test_record_then_replay_identical(tmp_path):
    store = str(tmp_path / "store.jsonl")
    inner = ScriptedBackend(Script.of("first", "second"))
    recorder = RecordingBackend(inner, store)
    replies = [recorder.complete(_request("a")), recorder.complete(_request("b"))]
    with open(store) as fh:
        assert len(fh.readlines()) == 2  # >= 1 persisted pair per exchange
    replayer = ReplayBackend(store)
    assert [replayer.complete(_request("a")), replayer.complete(_request("b"))] == replies


def test_replay_miss_on_perturbed_prompt(tmp_path):
    store = str(tmp_path / "store.jsonl")
    RecordingBackend(ScriptedBackend(Script.of("x")), store).complete(_request("a"))
    with pytest.raises(ReplayMiss):
        ReplayBackend(store).complete(_request("a (perturbed)"))


def test_replay_repeated_identical_requests_in_order(tmp_path):
    store = str(tmp_path / "store.jsonl")
    recorder = RecordingBackend(ScriptedBackend(Script.of("r1", "r2")), store)
    assert recorder.complete(_request("same")) == "r1"
    assert recorder.complete(_request("same")) == "r2"
    replayer = ReplayBackend(store)
    assert replayer.complete(_request("same")) == "r1"
    assert replayer.complete(_request("same")) == "r2"
    assert replayer.complete(_request("same")) == "r2"  # repeats last after queue drains


# --- registry and config files ---

def test_registry_fresh_scripted_instances():
    registry = BackendRegistry()
    registry.register_script("s", Script.of("only"))
    registry.register("sup", ScriptedBinding("s"))
    a = registry.make("sup")
    b = registry.make("sup")
    assert a.complete(_request()) == "only"
    assert b.complete(_request()) == "only"  # own cursor


def test_registry_record_wrapper(tmp_path):
    store = str(tmp_path / "rec.jsonl")
    registry = BackendRegistry()
    registry.register_script("s", Script.of("hi"))
    registry.register("sup", record_and_replay(ScriptedBinding("s"), store))
    registry.make("sup").complete(_request())
    assert ReplayBackend(store).complete(_request()) == "hi"


def test_load_backend_config_toml(tmp_path):
    config = tmp_path / "backends.toml"
    config.write_text(
        """
[scripts.sup]
replies = ["<domain>hotel</domain>"]
exhaustion = "repeat_last"

[bindings.scripted_sup]
type = "scripted"
script = "sup"

[bindings.remote_judge]
type = "remote"
endpoint = "http://127.0.0.1:9999/v1"
model = "judge-model"
credentials_env = "JUDGE_TOKEN"

[roles]
supervisor = "scripted_sup"
judge = "remote_judge"
"""
    )
    registry, roles = load_backend_config(str(config))
    assert roles == {"supervisor": "scripted_sup", "judge": "remote_judge"}
    assert registry.make("scripted_sup").complete(_request()) == "<domain>hotel</domain>"
    binding = registry.binding("remote_judge")
    assert binding.model == "judge-model" and binding.credentials_env == "JUDGE_TOKEN"


def test_load_backend_config_rejects_dangling_role(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"roles": {"supervisor": "nope"}}))
    with pytest.raises(KeyError):
        load_backend_config(str(config))
