import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from conftest import CBO_ASSIGNMENT
from hierchunk.errors import AssignmentError
from hierchunk.layout import extract_header_list
from hierchunk.providers import (
    SYSTEM_PROMPT,
    ProviderConfig,
    ProviderError,
    ProviderKind,
    build_prompt,
    resolve_hierarchy,
    resolve_many,
)


def llm_config(**kw):
    base = dict(kind="llm", endpoint_url="http://llm.test/v1/chat/completions", model_name="m", max_retries=1)
    base.update(kw)
    return ProviderConfig(**base)


def reply(content):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": content}}]})


def scripted_client(*steps):
    """Client whose n-th request gets steps[n] (a Response, or an exception to raise)."""
    calls = []

    def handler(request):
        calls.append(json.loads(request.content))
        step = steps[min(len(calls) - 1, len(steps) - 1)]
        if isinstance(step, Exception):
            raise step
        return step

    return httpx.Client(transport=httpx.MockTransport(handler)), calls


def test_prompt_payload_order_and_fields(cbo_layout):
    bundle = build_prompt(extract_header_list(cbo_layout))
    assert bundle.system_prompt == SYSTEM_PROMPT
    assert bundle.user_payload.startswith('[{"id": "2", "text": "CONGRESSIONAL BUDGET OFFICE COST ESTIMATE"')
    records = json.loads(bundle.user_payload)
    assert [r["id"] for r in records] == ["2", "5", "23", "37", "39", "44", "46"]
    assert set(records[0]) == {"id", "text", "page_number", "top", "left"}


def test_prompt_rejects_empty():
    with pytest.raises(ValueError):
        build_prompt([])


def test_system_prompt_shape():
    assert SYSTEM_PROMPT.startswith("You are an expert in analyzing section headers")
    assert "\nThe following is a list of 'section header' texts" in SYSTEM_PROMPT
    assert '"parent": "<id of the parent node or null if root>"' in SYSTEM_PROMPT


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        ProviderConfig(kind="file")
    with pytest.raises(ValueError):
        ProviderConfig(kind="llm", endpoint_url="http://x")
    with pytest.raises(ValueError):
        llm_config(max_retries=-1)
    cfg = llm_config(request_timeout_seconds=5)
    assert ProviderConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_heuristic_provider(cbo_layout):
    a = resolve_hierarchy(ProviderConfig(), extract_header_list(cbo_layout))
    assert a.source == "heuristic" and not a.fallback


def test_file_provider(tmp_path, cbo_layout):
    path = tmp_path / "assign.json"
    path.write_text(json.dumps({"cbo": json.loads(CBO_ASSIGNMENT)}))
    cfg = ProviderConfig(kind=ProviderKind.FILE, file_path=str(path))
    a = resolve_hierarchy(cfg, extract_header_list(cbo_layout), "cbo")
    assert a.parents["44"] == "37" and a.roots() == ["2"]
    with pytest.raises(ProviderError, match="'other'"):
        resolve_hierarchy(cfg, extract_header_list(cbo_layout), "other")


def test_file_provider_invalid_entries(tmp_path, cbo_layout):
    path = tmp_path / "assign.json"
    path.write_text(json.dumps({"cbo": [{"id": "2", "parent": "5"}, {"id": "5", "parent": "2"}]}))
    with pytest.raises(AssignmentError):
        resolve_hierarchy(ProviderConfig(kind="file", file_path=str(path)), extract_header_list(cbo_layout), "cbo")


def test_file_provider_missing_file(tmp_path):
    cfg = ProviderConfig(kind="file", file_path=str(tmp_path / "nope.json"))
    with pytest.raises(ProviderError):
        resolve_hierarchy(cfg, [], "cbo")


def test_llm_fenced_reply_accepted(cbo_layout):
    client, calls = scripted_client(reply("```json\n" + CBO_ASSIGNMENT + "\n```"))
    a = resolve_hierarchy(llm_config(), extract_header_list(cbo_layout), client=client)
    assert not a.fallback and a.source == "llm"
    assert a.parents["46"] == "37"
    assert len(calls) == 1
    assert calls[0]["temperature"] == 0 and calls[0]["model"] == "m"
    assert calls[0]["messages"][0] == {"role": "system", "content": SYSTEM_PROMPT}


def test_llm_cyclic_reply_falls_back(cbo_layout):
    cyclic = '[{"id":"2","parent":"5"},{"id":"5","parent":"2"}]'
    client, calls = scripted_client(reply(cyclic))
    a = resolve_hierarchy(llm_config(max_retries=1), extract_header_list(cbo_layout), client=client)
    assert a.fallback and a.source == "heuristic-fallback"
    assert "Cycle" in a.fallback_reason
    assert len(calls) == 2


def test_llm_timeout_falls_back(cbo_layout):
    client, calls = scripted_client(httpx.ReadTimeout("slow"))
    a = resolve_hierarchy(llm_config(max_retries=2), extract_header_list(cbo_layout), client=client)
    assert a.fallback and "ReadTimeout" in a.fallback_reason
    assert len(calls) == 3


def test_llm_retry_then_success(cbo_layout):
    client, calls = scripted_client(httpx.Response(500), reply("not json"), reply(CBO_ASSIGNMENT))
    a = resolve_hierarchy(llm_config(max_retries=2), extract_header_list(cbo_layout), client=client)
    assert not a.fallback and len(calls) == 3


def test_llm_reply_naming_non_header_invalid(cbo_layout):
    client, _ = scripted_client(reply('[{"id":"t2","parent":null}]'))
    a = resolve_hierarchy(llm_config(max_retries=0), extract_header_list(cbo_layout), client=client)
    assert a.fallback


def test_llm_no_headers_needs_no_request():
    client, calls = scripted_client(httpx.ReadTimeout("x"))
    a = resolve_hierarchy(llm_config(), [], client=client)
    assert len(a) == 0 and not calls


def test_resolve_many_keeps_order_and_errors(tmp_path, cbo_layout):
    path = tmp_path / "assign.json"
    path.write_text(json.dumps({"cbo": json.loads(CBO_ASSIGNMENT)}))
    headers = extract_header_list(cbo_layout)
    out = resolve_many(ProviderConfig(kind="file", file_path=str(path)), [("cbo", headers), ("zzz", headers)])
    assert out[0].parents["5"] == "2"
    assert isinstance(out[1], ProviderError)


class _Handler(BaseHTTPRequestHandler):
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        _Handler.seen.append((self.headers.get("Authorization"), body))
        out = json.dumps({"choices": [{"message": {"content": CBO_ASSIGNMENT}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


def test_llm_over_real_http(cbo_layout, monkeypatch):
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    monkeypatch.setenv("HC_TEST_KEY", "sekrit")
    try:
        cfg = llm_config(endpoint_url=f"http://127.0.0.1:{server.server_port}/v1/chat", api_key_env_var="HC_TEST_KEY",
                         request_timeout_seconds=5)
        headers = extract_header_list(cbo_layout)
        out = resolve_many(cfg, [("a", headers), ("b", headers)])
    finally:
        server.shutdown()
    assert all(not r.fallback for r in out)
    assert [auth for auth, _ in _Handler.seen] == ["Bearer sekrit"] * 2
