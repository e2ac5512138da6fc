import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from colt import preference
from colt.preference import (CandidateSet, HttpProvider, Sampling, ToyProvider, build_triples,
                             filter_rejected, generate_all, generate_candidates, split_sft_rl)
from colt.taskgen import CompletionTask


def _task(tid, repo="r", gt="return a+b"):
    return CompletionTask(tid, repo, "f.py", "Python", "SingleLine", (0, 1), (0, 0), gt, 3)


def test_filter_example():
    gt = "return a+b"
    assert filter_rejected([gt, "", "x+y", gt + "\n// more", "x+y"], gt) == ["x+y"]


def test_filter_cap_and_all_correct():
    assert filter_rejected(["a1", "a2", "a3", "a4", "a5"], "gt") == ["a1", "a2", "a3"]
    assert filter_rejected(["gt", " gt\n", "gt\r\n"], "gt") == []


def test_filter_keeps_text_verbatim():
    assert filter_rejected(["  x = 1\n"], "y") == ["  x = 1\n"]
    assert filter_rejected(["x = 1", "x = 1  "], "y") == ["x = 1"]


def test_build_triples_counts():
    tasks = [_task("t1"), _task("t2"), _task("t3")]
    sets = {"t1": CandidateSet("t1", ["u", "v"], Sampling()),
            "t2": CandidateSet("t2", ["return a+b"], Sampling()),
            "t3": CandidateSet("t3", ["p", "q", "r", "s"], Sampling())}
    triples = build_triples(tasks, {"t1": "P1", "t2": "P2", "t3": "P3"}, sets)
    assert [t.task_id for t in triples] == ["t1", "t1", "t3", "t3", "t3"]
    assert {(t.prompt, t.chosen) for t in triples if t.task_id == "t1"} == {("P1", "return a+b")}
    assert len(triples) == sum(len(filter_rejected(sets[t].candidates, "return a+b"))
                               for t in sets)


def test_split_sft_rl():
    tasks = [_task(f"t{i}", repo=f"r{i % 10}") for i in range(40)]
    sft, rl = split_sft_rl(tasks, 0.5, random.Random(0))
    assert len({t.repo_id for t in sft}) == 5 and len({t.repo_id for t in rl}) == 5
    assert not {t.repo_id for t in sft} & {t.repo_id for t in rl}
    again = split_sft_rl(tasks, 0.5, random.Random(0))
    assert [t.task_id for t in again[0]] == [t.task_id for t in sft]
    sft, rl = split_sft_rl(tasks, 1.0, random.Random(0))
    assert len(sft) == 40 and rl == []
    with pytest.raises(preference.UsageError):
        split_sft_rl([_task("a")], 0.5)


def test_toy_provider_deterministic():
    prompt = "# path: a.py\nx = compute(a)\ny = compute(b)\n<PRE>z = comp<SUF>\n<MID>"
    a = ToyProvider(7).complete(prompt, Sampling(n=10))
    b = ToyProvider(7).complete(prompt, Sampling(n=10))
    assert a == b and len(a) == 10


class _Short:
    calls = 0

    def complete(self, prompt, sampling):
        self.calls += 1
        return ["a", "b", "c", "d", "e", "f", "g"]


def test_generate_candidates_counts():
    p = _Short()
    assert len(generate_candidates(p, "t", "prompt", Sampling(n=10)).candidates) == 7
    cs = generate_candidates(p, "t", "prompt", Sampling(n=0))
    assert cs.candidates == [] and p.calls == 1


class _Flaky:
    def complete(self, prompt, sampling):
        if prompt == "bad":
            raise preference.ProviderError("boom")
        return ["x"]


def test_generate_all_skips_failures():
    sets, skipped = generate_all(_Flaky(), {"t1": "ok", "t2": "bad"}, Sampling(n=1), jobs=2)
    assert list(sets) == ["t1"] and skipped == [("t2", "boom")]


def _serve(body, status=200):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            n = int(self.headers["Content-Length"])
            req = json.loads(self.rfile.read(n))
            self.server.requests.append((self.path, req))
            data = body(req) if callable(body) else body
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(data.encode())

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    server.requests = []
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def test_http_provider_round_trip():
    server = _serve(lambda req: json.dumps({"completions": [f"c{i}" for i in range(req["n"])]}))
    try:
        url = f"http://127.0.0.1:{server.server_port}"
        got = HttpProvider(url, timeout=5).complete("P", Sampling(n=3, stop=("\n",)))
        assert got == ["c0", "c1", "c2"]
        path, req = server.requests[0]
        assert path == "/v1/complete"
        assert req == {"prompt": "P", "n": 3, "temperature": 1.5, "top_p": 0.95,
                       "max_tokens": 128, "stop": ["\n"]}
    finally:
        server.shutdown()


def test_http_provider_protocol_error():
    server = _serve('{"choices": []}')
    try:
        provider = HttpProvider(f"http://127.0.0.1:{server.server_port}", timeout=5)
        with pytest.raises(preference.ProtocolError):
            provider.complete("P", Sampling(n=1))
        with pytest.raises(preference.ProtocolError):
            generate_all(provider, {"t": "P"}, Sampling(n=1))
    finally:
        server.shutdown()


def test_http_provider_unreachable(monkeypatch):
    monkeypatch.delenv("COLT_PROVIDER_URL", raising=False)
    with pytest.raises(preference.ProviderError):
        HttpProvider(None)
    provider = HttpProvider("http://127.0.0.1:9", timeout=1)
    with pytest.raises(preference.ProviderError):
        provider.complete("P", Sampling(n=1))
